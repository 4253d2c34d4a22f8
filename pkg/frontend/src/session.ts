// Review-session state machine.
//
// Invariants the tests pin down:
//  - every displayed string is copied verbatim from the most recent server
//    response; the client holds no measurement math at all;
//  - the dirty flag is set exactly when the working keypoints differ from
//    the persisted version;
//  - dragging recomputes through the server, debounced while the pointer
//    moves and flushed on release;
//  - saving uses optimistic versioning, and a stale save raises a conflict
//    banner instead of overwriting.

import { ApiClient, ApiError, ConflictError, Transport } from "./api.js";
import {
  ANGLE_KINDS,
  AngleKind,
  KEYPOINT_NAMES,
  KeypointsDoc,
  ResultsPayload,
  Side,
  SIDES,
  StudyListEntry,
} from "./types.js";

export interface Scheduler {
  schedule(fn: () => void, ms: number): number;
  cancel(handle: number): void;
}

export const windowScheduler: Scheduler = {
  schedule: (fn, ms) => setTimeout(fn, ms) as unknown as number,
  cancel: (handle) => clearTimeout(handle),
};

export interface AngleCell {
  label: AngleKind;
  text: string; // server display string, verbatim
  score: string;
  red: boolean; // dysplastic-range highlight
}

export interface HipPanel {
  side: Side;
  cells: AngleCell[];
  displacement: string;
  pelvicHeight: string;
  croweRatio: string;
  totalScore: string;
  verdict: string;
  croweGrade: string;
}

export interface ConflictBanner {
  kind: "conflict";
  currentVersion: number;
  message: string;
}

export const DEBOUNCE_MS = 150;

function cloneKeypoints(doc: KeypointsDoc): KeypointsDoc {
  const out = {} as KeypointsDoc;
  for (const side of SIDES) {
    out[side] = {} as KeypointsDoc[Side];
    for (const name of KEYPOINT_NAMES) {
      out[side][name] = [doc[side][name][0], doc[side][name][1]];
    }
  }
  return out;
}

function sameKeypoints(a: KeypointsDoc | null, b: KeypointsDoc | null): boolean {
  if (a === null || b === null) return a === b;
  for (const side of SIDES) {
    for (const name of KEYPOINT_NAMES) {
      if (a[side][name][0] !== b[side][name][0]) return false;
      if (a[side][name][1] !== b[side][name][1]) return false;
    }
  }
  return true;
}

export class ReviewSession {
  readonly api: ApiClient;

  studies: StudyListEntry[] = [];
  studyId: string | null = null;
  version = 0;
  imagePath: string | null = null;

  working: KeypointsDoc | null = null;
  private persisted: KeypointsDoc | null = null;

  lastResponse: ResultsPayload | null = null;
  banner: ConflictBanner | null = null;
  inlineError: string | null = null;
  selectedSide: Side = "right";

  onChange: () => void = () => {};

  private debounceHandle: number | null = null;
  private requestSeq = 0;

  constructor(
    transport: Transport,
    private scheduler: Scheduler = windowScheduler,
    private debounceMs: number = DEBOUNCE_MS
  ) {
    this.api = new ApiClient(transport);
  }

  get dirty(): boolean {
    return this.working !== null && !sameKeypoints(this.working, this.persisted);
  }

  async refreshStudies(): Promise<void> {
    this.studies = await this.api.listStudies();
    this.onChange();
  }

  async open(studyId: string): Promise<void> {
    const response = await this.api.getStudy(studyId);
    const keypoints =
      response.study.ground_truth?.keypoints ??
      response.study.annotations[0]?.keypoints;
    if (!keypoints) {
      throw new ApiError(422, `study ${studyId} carries no keypoints`);
    }
    this.studyId = studyId;
    this.version = response.version;
    this.imagePath = response.study.image ? this.api.imageUrl(studyId) : null;
    this.persisted = cloneKeypoints(keypoints);
    this.working = cloneKeypoints(keypoints);
    this.lastResponse =
      response.measurements && response.diagnosis
        ? { measurements: response.measurements, diagnosis: response.diagnosis }
        : null;
    this.banner = null;
    this.inlineError = response.error ?? null;
    this.onChange();
  }

  moveKeypoint(side: Side, name: (typeof KEYPOINT_NAMES)[number], x: number, y: number): void {
    if (!this.working) return;
    this.working[side][name] = [x, y];
    if (this.debounceHandle !== null) {
      this.scheduler.cancel(this.debounceHandle);
    }
    this.debounceHandle = this.scheduler.schedule(() => {
      this.debounceHandle = null;
      void this.recompute();
    }, this.debounceMs);
    this.onChange();
  }

  async endDrag(): Promise<void> {
    if (this.debounceHandle !== null) {
      this.scheduler.cancel(this.debounceHandle);
      this.debounceHandle = null;
    }
    await this.recompute();
  }

  async recompute(): Promise<void> {
    if (!this.working) return;
    const seq = ++this.requestSeq;
    try {
      const results = await this.api.diagnose(this.working);
      if (seq !== this.requestSeq) return; // a newer request superseded this one
      this.lastResponse = results;
      this.inlineError = null;
    } catch (err) {
      if (seq !== this.requestSeq) return;
      if (err instanceof ApiError) {
        this.inlineError = err.message; // names the offending landmark
      } else {
        throw err;
      }
    }
    this.onChange();
  }

  async save(): Promise<void> {
    if (!this.studyId || !this.working) return;
    if (!this.dirty) return; // nothing to persist
    try {
      const response = await this.api.putKeypoints(this.studyId, this.version, this.working);
      this.version = response.version;
      this.persisted = cloneKeypoints(this.working);
      this.lastResponse = {
        measurements: response.measurements,
        diagnosis: response.diagnosis,
      };
      this.banner = null;
      this.inlineError = null;
    } catch (err) {
      if (err instanceof ConflictError) {
        this.banner = {
          kind: "conflict",
          currentVersion: err.currentVersion,
          message:
            `someone saved version ${err.currentVersion} first; ` +
            "reload to pick up their edits",
        };
      } else if (err instanceof ApiError) {
        this.inlineError = err.message;
      } else {
        throw err;
      }
    }
    this.onChange();
  }

  async reloadFromServer(): Promise<void> {
    if (this.studyId) {
      await this.open(this.studyId);
    }
  }

  // Side panel built verbatim from the last server payload; an empty panel
  // when no response has arrived yet.
  panel(side: Side): HipPanel | null {
    if (!this.lastResponse) return null;
    const m = this.lastResponse.measurements[side];
    const d = this.lastResponse.diagnosis[side];
    const displayByKind: Record<AngleKind, string> = {
      ce: m.display.ce_deg,
      tonnis: m.display.tonnis_deg,
      sharp: m.display.sharp_deg,
    };
    return {
      side,
      cells: ANGLE_KINDS.map((kind) => ({
        label: kind,
        text: displayByKind[kind],
        score: String(d.per_angle_score[kind]),
        red: d.per_angle_class[kind] === "ddh",
      })),
      displacement: m.display.displacement_px,
      pelvicHeight: m.display.pelvic_height_px,
      croweRatio: m.display.crowe_r,
      totalScore: String(d.total_score),
      verdict: d.verdict === "present" ? "DDH present" : "DDH absent",
      croweGrade: d.crowe_grade ?? "",
    };
  }
}
