// Mirrors of the /v1 JSON shapes. The console never invents state: every
// field here is copied verbatim from a service response.

export const STAGES = [
  "promptgen",
  "isolation",
  "multiview",
  "reconstruction",
  "assembly",
] as const;

export type StageName = (typeof STAGES)[number];

export type StageState = "pending" | "running" | "awaiting_approval" | "done" | "failed";

export interface StageStatus {
  state: StageState;
  error: string | null;
  approval_required: boolean;
}

export interface ArtifactRef {
  hash: string;
  media: string;
  provenance?: Record<string, unknown>;
}

export interface PartSpec {
  part_id: string;
  display_name: string;
  user_description: string;
  occlusion_directive: string | null;
}

export interface Job {
  v: number;
  job_id: string;
  input_image: string; // digest; the typed ref lives at artifacts["input"]
  parts: PartSpec[];
  seed: number;
  stages: Record<StageName, StageStatus>;
  artifacts: Record<string, ArtifactRef>;
  tombstones: string[];
  created_at: string;
  updated_at: string;
}

export interface PromptFields {
  part_id: string;
  keep_subject: string;
  removal_clause: string;
  pose_description: string;
  camera_angle_description: string;
  lighting_description: string;
  occlusion_imagination: string;
  negative_terms: string[];
  raw_text?: string;
}

export const EDITABLE_PROMPT_FIELDS = [
  "keep_subject",
  "removal_clause",
  "pose_description",
  "camera_angle_description",
  "lighting_description",
  "occlusion_imagination",
  "negative_terms",
] as const;

export type EditableField = (typeof EDITABLE_PROMPT_FIELDS)[number];

export interface ScenePlacement {
  part_id: string;
  scale: number;
  translation: [number, number, number];
  image_iou: number;
}

export interface SceneManifest {
  v: number;
  parts: ScenePlacement[];
}
