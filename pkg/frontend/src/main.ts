import { fetchTransport } from "./api.js";
import { ReviewSession } from "./session.js";
import { ReviewView } from "./view.js";

const session = new ReviewSession(fetchTransport());
const view = new ReviewView(session, document.body);
void view.start();
