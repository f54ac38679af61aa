import { Job, SceneManifest, StageName } from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** Thin typed wrapper over the /v1 HTTP API. `base` is "" when the console
 * is served by the pipeline service itself, or an absolute origin in tests. */
export class Client {
  constructor(readonly base: string = "") {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let res: Response;
    try {
      res = await fetch(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, "Unreachable", String(err));
    }
    const text = await res.text();
    let data: unknown = null;
    try {
      data = text ? JSON.parse(text) : null;
    } catch {
      data = null;
    }
    if (!res.ok) {
      const body = (data ?? {}) as { error?: string; detail?: string };
      throw new ApiError(res.status, body.error ?? `http_${res.status}`, body.detail ?? text);
    }
    return data;
  }

  private json(path: string, method: string, body: unknown): Promise<unknown> {
    return this.request(path, {
      method,
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async health(): Promise<boolean> {
    const d = (await this.request("/v1/health")) as { ok?: boolean };
    return d.ok === true;
  }

  async listJobs(): Promise<Job[]> {
    const d = (await this.request("/v1/jobs")) as { jobs: Job[] };
    return d.jobs;
  }

  getJob(jobId: string): Promise<Job> {
    return this.request(`/v1/jobs/${jobId}`) as Promise<Job>;
  }

  createDemoJob(seed = 7): Promise<Job> {
    return this.json("/v1/jobs", "POST", { demo: true, seed }) as Promise<Job>;
  }

  stage(jobId: string, stage: StageName, op: "start" | "approve" | "reject"): Promise<Job> {
    return this.json(`/v1/jobs/${jobId}/stages/${stage}:${op}`, "POST", {}) as Promise<Job>;
  }

  editPrompt(
    jobId: string,
    partId: string,
    fields: Record<string, unknown>,
    baseHash?: string,
  ): Promise<Job> {
    const body: Record<string, unknown> = { fields };
    if (baseHash !== undefined) body.base_hash = baseHash;
    return this.json(`/v1/jobs/${jobId}/prompts/${partId}`, "PUT", body) as Promise<Job>;
  }

  artifactUrl(digest: string): string {
    return `${this.base}/v1/artifacts/${digest}`;
  }

  async artifactText(digest: string): Promise<string> {
    let res: Response;
    try {
      res = await fetch(this.artifactUrl(digest));
    } catch (err) {
      throw new ApiError(0, "Unreachable", String(err));
    }
    if (!res.ok) throw new ApiError(res.status, `http_${res.status}`, await res.text());
    return res.text();
  }

  async artifactJson<T = unknown>(digest: string): Promise<T> {
    return JSON.parse(await this.artifactText(digest)) as T;
  }

  sceneManifest(digest: string): Promise<SceneManifest> {
    return this.artifactJson<SceneManifest>(digest);
  }
}
