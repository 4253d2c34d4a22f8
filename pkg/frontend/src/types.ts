// Wire types for the /api endpoints. The server is the single source of
// numerical truth: clients render the `display` strings verbatim and never
// recompute measurements locally.

export type Side = "right" | "left";
export type AngleKind = "ce" | "tonnis" | "sharp";
export type AngleClass = "normal" | "borderline" | "ddh";

export type KeypointName =
  | "teardrop"
  | "fh_center"
  | "lat_sourcil"
  | "med_sourcil"
  | "fhn_junction"
  | "inf_ischium"
  | "sup_ilium";

export const KEYPOINT_NAMES: KeypointName[] = [
  "teardrop",
  "fh_center",
  "lat_sourcil",
  "med_sourcil",
  "fhn_junction",
  "inf_ischium",
  "sup_ilium",
];

export const SIDES: Side[] = ["right", "left"];
export const ANGLE_KINDS: AngleKind[] = ["ce", "tonnis", "sharp"];

export type HipKeypointsDoc = Record<KeypointName, [number, number]>;
export type KeypointsDoc = Record<Side, HipKeypointsDoc>;

export interface MeasurementsPayload {
  side: Side;
  ce_deg: number;
  tonnis_deg: number;
  sharp_deg: number;
  displacement_px: number;
  pelvic_height_px: number;
  crowe_r: number;
  display: {
    ce_deg: string;
    tonnis_deg: string;
    sharp_deg: string;
    displacement_px: string;
    pelvic_height_px: string;
    crowe_r: string;
  };
}

export interface DiagnosisPayload {
  side: Side;
  per_angle_class: Record<AngleKind, AngleClass>;
  per_angle_score: Record<AngleKind, number>;
  total_score: number;
  verdict: "present" | "absent";
  crowe_grade: string | null;
}

export interface ResultsPayload {
  measurements: Record<Side, MeasurementsPayload>;
  diagnosis: Record<Side, DiagnosisPayload>;
}

export interface StudyListEntry {
  study_id: string;
  version: number;
  verdicts: Record<Side, string | null>;
}

export interface StudyDoc {
  study_id: string;
  image?: { path: string; width: number; height: number };
  annotations: unknown[];
  ground_truth?: { keypoints: KeypointsDoc };
}

export interface StudyResponse extends Partial<ResultsPayload> {
  study: StudyDoc & { annotations: Array<{ keypoints: KeypointsDoc }> };
  version: number;
  error?: string;
}

export interface PutResponse extends ResultsPayload {
  version: number;
}
