// Thin typed client over an injectable transport so the session logic can
// be exercised without a browser or a running server.

import type {
  KeypointsDoc,
  PutResponse,
  ResultsPayload,
  StudyListEntry,
  StudyResponse,
} from "./types.js";

export interface HttpReply {
  status: number;
  body: any;
}

export interface Transport {
  request(method: string, path: string, body?: unknown): Promise<HttpReply>;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

export class ConflictError extends ApiError {
  constructor(public currentVersion: number, detail: string) {
    super(409, detail);
  }
}

export function fetchTransport(baseUrl = ""): Transport {
  return {
    async request(method, path, body) {
      const response = await fetch(baseUrl + path, {
        method,
        headers: body === undefined ? {} : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
      let parsed: any = null;
      try {
        parsed = await response.json();
      } catch {
        parsed = null;
      }
      return { status: response.status, body: parsed };
    },
  };
}

function expectOk(reply: HttpReply): any {
  if (reply.status === 409) {
    throw new ConflictError(
      reply.body?.current_version ?? -1,
      reply.body?.detail ?? "version conflict"
    );
  }
  if (reply.status >= 400) {
    throw new ApiError(reply.status, reply.body?.detail ?? `http ${reply.status}`);
  }
  return reply.body;
}

export class ApiClient {
  constructor(private transport: Transport) {}

  async listStudies(): Promise<StudyListEntry[]> {
    return expectOk(await this.transport.request("GET", "/api/studies"));
  }

  async getStudy(studyId: string): Promise<StudyResponse> {
    return expectOk(
      await this.transport.request("GET", `/api/studies/${encodeURIComponent(studyId)}`)
    );
  }

  imageUrl(studyId: string): string {
    return `/api/studies/${encodeURIComponent(studyId)}/image`;
  }

  async diagnose(keypoints: KeypointsDoc): Promise<ResultsPayload> {
    return expectOk(
      await this.transport.request("POST", "/api/diagnose", { keypoints })
    );
  }

  async putKeypoints(
    studyId: string,
    version: number,
    keypoints: KeypointsDoc
  ): Promise<PutResponse> {
    return expectOk(
      await this.transport.request(
        "PUT",
        `/api/studies/${encodeURIComponent(studyId)}/keypoints`,
        { version, keypoints }
      )
    );
  }
}
