// @vitest-environment jsdom
//
// Drives the built console against a real service process: create a demo job,
// edit one prompt field, approve the two gated stages, run the remaining
// stages to completion and check that the assembled scene preview painted.
// Everything goes through the DOM; the test never calls the engine directly.
import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, Client } from "../src/api";
import { App } from "../src/app";
import { Job, PromptFields } from "../src/types";
import { until } from "./fixtures";

const REPO_ROOT = join(__dirname, "..", "..");
const EDITED_TEXT = "imagine the hidden half as a complete smooth ball";

let proc: ChildProcess;
let storeDir: string;
let base: string;
let client: Client;
let app: App;
let root: HTMLElement;
let canvasFills = 0;
let serverLog = "";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as { port: number }).port;
      srv.close(() => resolve(port));
    });
  });
}

/** Minimal recording 2D context: jsdom has no canvas backend, so render()
 * would bail out before painting. Counting fill calls is the paint check. */
function stubCanvas(): void {
  const ctx = {
    fillStyle: "",
    fillRect: () => {
      canvasFills += 1;
    },
    beginPath: () => {},
    moveTo: () => {},
    lineTo: () => {},
    closePath: () => {},
    fill: () => {
      canvasFills += 1;
    },
  };
  HTMLCanvasElement.prototype.getContext = (() => ctx) as unknown as typeof HTMLCanvasElement.prototype.getContext;
}

function stageRow(stage: string): HTMLElement {
  return root.querySelector(`[data-stage-row="${stage}"]`) as HTMLElement;
}

function badgeState(stage: string): string {
  const badge = stageRow(stage)?.querySelector(`[data-stage="${stage}"]`);
  const cls = Array.from(badge?.classList ?? []).find((c) => c.startsWith("badge-"));
  return cls ? cls.slice("badge-".length) : "";
}

function click(selector: string): void {
  const el = root.querySelector<HTMLElement>(selector);
  if (!el) throw new Error(`nothing matches ${selector}`);
  el.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}

async function startStageAndAwait(stage: string, finalState: string): Promise<void> {
  await until(() => stageRow(stage)?.querySelector(`button[data-op="start"]`) != null, 30_000);
  click(`[data-stage-row="${stage}"] button[data-op="start"]`);
  await until(() => badgeState(stage) === finalState, 120_000, 50);
}

beforeAll(async () => {
  storeDir = mkdtempSync(join(tmpdir(), "console-e2e-"));
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  proc = spawn(
    "python3",
    ["-m", "partforge.cli", "--store", storeDir, "serve", "--host", "127.0.0.1", "--port", String(port)],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  proc.stdout?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  proc.stderr?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));

  client = new Client(base);
  const deadline = Date.now() + 90_000;
  for (;;) {
    try {
      if (await client.health()) break;
    } catch (err) {
      if (!(err instanceof ApiError) || err.status !== 0) throw err;
    }
    if (Date.now() > deadline) throw new Error(`service never came up\n${serverLog}`);
    await new Promise((resolve) => setTimeout(resolve, 100));
  }

  stubCanvas();
  document.body.innerHTML = `<div id="app"></div>`;
  root = document.getElementById("app") as HTMLElement;
  app = new App(root, client, { intervalMs: 150 });
  app.start();
}, 120_000);

afterAll(() => {
  app?.stop();
  proc?.kill("SIGTERM");
  if (storeDir) rmSync(storeDir, { recursive: true, force: true });
});

describe("operator flow", () => {
  it("creates a job, edits a prompt, approves the gates and previews the scene", { timeout: 300_000 }, async () => {
    // job board -> new demo job -> job page
    await until(() => root.querySelector("[data-role=new-demo]") != null, 10_000);
    click("[data-role=new-demo]");
    await until(() => /#\/job\/.+/.test(window.location.hash), 15_000);
    const jobId = window.location.hash.replace("#/job/", "");
    await until(() => stageRow("promptgen") != null, 10_000);
    expect(badgeState("assembly")).toBe("pending");

    // promptgen runs, then waits at its gate
    await startStageAndAwait("promptgen", "awaiting_approval");

    // edit one prompt field and save
    const field = () => root.querySelector<HTMLInputElement>('[data-part="ball"] [data-field="occlusion_imagination"]');
    await until(() => field() != null, 15_000);
    const original = field()!.value;
    expect(original).not.toBe(EDITED_TEXT);
    field()!.value = EDITED_TEXT;
    field()!.dispatchEvent(new Event("input", { bubbles: true }));
    click('[data-part="ball"] [data-role=save]');
    await until(
      () => (root.querySelector('[data-part="ball"] [data-role=msg]')?.textContent ?? "").includes("saved"),
      15_000,
    );

    // the edit is persisted server-side, not just local state
    const job: Job = await client.getJob(jobId);
    const stored = await client.artifactJson<PromptFields>(job.artifacts["promptgen/ball"].hash);
    expect(stored.occlusion_imagination).toBe(EDITED_TEXT);
    expect(stored.raw_text).toContain(EDITED_TEXT);

    // approve promptgen, then isolation after it runs
    click('[data-stage-row="promptgen"] button[data-op="approve"]');
    await until(() => badgeState("promptgen") === "done", 30_000);
    await startStageAndAwait("isolation", "awaiting_approval");
    await until(() => root.querySelector('[data-isolation="ball"] img') != null, 15_000);
    click('[data-stage-row="isolation"] button[data-op="approve"]');
    await until(() => badgeState("isolation") === "done", 30_000);

    // run the rest of the pipeline from the stage rows
    await startStageAndAwait("multiview", "done");
    await startStageAndAwait("reconstruction", "done");
    await startStageAndAwait("assembly", "done");

    // gallery: isolations, six views per part, per-part meshes
    expect(root.querySelectorAll("[data-isolation] img")).toHaveLength(2);
    await until(() => root.querySelectorAll("[data-views] .view-grid img").length === 12, 15_000);
    await until(
      () => /\d+ triangles/.test(root.querySelector('[data-mesh="ball"] .mesh-status')?.textContent ?? ""),
      30_000,
    );
    await until(
      () => /\d+ triangles/.test(root.querySelector('[data-mesh="base"] .mesh-status')?.textContent ?? ""),
      30_000,
    );

    // assembled scene preview: triangles projected and actually painted
    await until(
      () => /\d+ triangles/.test(root.querySelector('[data-mesh="__scene__"] .mesh-status')?.textContent ?? ""),
      30_000,
    );
    const sceneStatus = root.querySelector('[data-mesh="__scene__"] .mesh-status')?.textContent ?? "";
    expect(parseInt(sceneStatus, 10)).toBeGreaterThan(0);
    expect(canvasFills).toBeGreaterThan(0);

    // the manifest the preview used matches what the service assembled
    const finished = await client.getJob(jobId);
    const manifest = await client.sceneManifest(finished.artifacts["assembly/scene.json"].hash);
    expect(manifest.parts.map((p) => p.part_id).sort()).toEqual(["ball", "base"]);
    for (const name of ["promptgen", "isolation", "multiview", "reconstruction", "assembly"] as const) {
      expect(finished.stages[name].state).toBe("done");
    }
  });
});
