import { ArtifactRef, Job, PromptFields, StageName, StageState, STAGES } from "../src/types";

export function stageMap(overrides: Partial<Record<StageName, StageState>> = {}): Job["stages"] {
  const stages = {} as Job["stages"];
  for (const name of STAGES) {
    stages[name] = {
      state: overrides[name] ?? "pending",
      error: null,
      approval_required: name === "promptgen" || name === "isolation",
    };
  }
  return stages;
}

export function ref(hash: string, media = "application/json"): ArtifactRef {
  return { hash, media };
}

export function makeJob(overrides: Partial<Job> = {}): Job {
  return {
    v: 1,
    job_id: "job-0001",
    input_image: "input0000",
    parts: [
      { part_id: "ball", display_name: "Ball", user_description: "the red ball", occlusion_directive: null },
      { part_id: "cube", display_name: "Cube", user_description: "the blue cube", occlusion_directive: null },
    ],
    seed: 7,
    stages: stageMap(),
    artifacts: {},
    tombstones: [],
    created_at: "2026-08-15T10:00:00Z",
    updated_at: "2026-08-15T10:00:00Z",
    ...overrides,
  };
}

export function makePrompt(overrides: Partial<PromptFields> = {}): PromptFields {
  return {
    part_id: "ball",
    keep_subject: "the red ball",
    removal_clause: "remove everything that is not the red ball",
    pose_description: "resting on the ground plane",
    camera_angle_description: "three-quarter view from slightly above",
    lighting_description: "soft studio lighting",
    occlusion_imagination: "complete the hidden lower half as a smooth sphere",
    negative_terms: ["text", "watermark"],
    ...overrides,
  };
}

/** Wait until `cond` holds, polling the microtask/timer queue. */
export async function until(cond: () => boolean, timeoutMs = 5000, stepMs = 10): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error("condition never became true");
    await new Promise((resolve) => setTimeout(resolve, stepMs));
  }
}
