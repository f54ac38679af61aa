import { ApiError, Client } from "./api";
import { JobBoard } from "./board";
import { escapeHtml, stageBadge } from "./dom";
import { Gallery } from "./gallery";
import { PromptPane } from "./promptpane";
import { Job, STAGES, StageName } from "./types";

export interface AppOptions {
  intervalMs?: number;
}

/** Hash-routed single-page console: `#/` is the job board, `#/job/<id>` the
 * job detail page (stage controls, prompt editor, artifact gallery). All
 * mutations are single API calls; the page re-renders from the response. */
export class App {
  readonly root: HTMLElement;
  readonly client: Client;
  private readonly intervalMs: number;
  private board: JobBoard | null = null;
  private pane: PromptPane | null = null;
  private gallery: Gallery | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private jobId: string | null = null;
  private lastUpdatedAt = "";
  private busy = false;

  constructor(root: HTMLElement, client: Client, opts: AppOptions = {}) {
    this.root = root;
    this.client = client;
    this.intervalMs = opts.intervalMs ?? 2000;
  }

  start(): void {
    window.addEventListener("hashchange", () => this.route());
    this.route();
  }

  stop(): void {
    this.teardown();
  }

  route(): void {
    this.teardown();
    const match = /^#\/job\/(.+)$/.exec(window.location.hash);
    if (match) {
      this.mountJobPage(decodeURIComponent(match[1]));
    } else {
      this.mountBoard();
    }
  }

  private teardown(): void {
    this.board?.stop();
    this.board = null;
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
    this.pane = null;
    this.gallery = null;
    this.jobId = null;
    this.lastUpdatedAt = "";
  }

  private mountBoard(): void {
    this.root.innerHTML = `<h2>Pipeline jobs</h2><div data-role="board"></div>`;
    this.board = new JobBoard(this.root.querySelector("[data-role=board]") as HTMLElement, this.client, {
      intervalMs: this.intervalMs,
      onOpen: (jobId) => {
        window.location.hash = `#/job/${jobId}`;
      },
    });
    this.board.start();
  }

  private mountJobPage(jobId: string): void {
    this.jobId = jobId;
    this.root.innerHTML = `
      <div class="crumbs"><a href="#/">&larr; jobs</a></div>
      <h2 class="mono">${escapeHtml(jobId)}</h2>
      <div class="banner hidden" data-role="banner"></div>
      <div class="card" data-role="stages"></div>
      <h3>Prompts</h3>
      <div data-role="prompts"></div>
      <div data-role="gallery"></div>`;
    this.pane = new PromptPane(
      this.root.querySelector("[data-role=prompts]") as HTMLElement,
      this.client,
      jobId,
      () => void this.refresh(),
    );
    this.gallery = new Gallery(this.root.querySelector("[data-role=gallery]") as HTMLElement, this.client);
    (this.root.querySelector("[data-role=stages]") as HTMLElement).addEventListener("click", (e) => {
      const button = (e.target as HTMLElement).closest<HTMLButtonElement>("button[data-op]");
      if (button) void this.stageOp(button.dataset.stage as StageName, button.dataset.op as "start" | "approve" | "reject");
    });
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.intervalMs);
  }

  private async refresh(): Promise<void> {
    if (!this.jobId || this.busy) return;
    let job: Job;
    try {
      job = await this.client.getJob(this.jobId);
    } catch (err) {
      this.showBanner(`service unreachable (${escapeHtml(err)}) — data below may be stale`);
      this.root.querySelector("[data-role=stages]")?.classList.add("stale");
      return;
    }
    this.hideBanner();
    this.root.querySelector("[data-role=stages]")?.classList.remove("stale");
    if (job.updated_at !== this.lastUpdatedAt) {
      this.lastUpdatedAt = job.updated_at;
      this.renderStages(job);
    }
    await this.pane?.update(job);
    await this.gallery?.update(job);
  }

  private async stageOp(stage: StageName, op: "start" | "approve" | "reject"): Promise<void> {
    this.busy = true; // a running stage owns the manifest; pause polling
    this.renderStageMsg(`${stage}:${op} …`, "muted");
    try {
      await this.client.stage(this.jobId as string, stage, op);
      this.renderStageMsg("", "muted");
    } catch (err) {
      const text = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      this.renderStageMsg(text, "err");
    } finally {
      this.busy = false;
      this.lastUpdatedAt = "";
      await this.refresh();
    }
  }

  private renderStageMsg(text: string, kind: string): void {
    const el = this.root.querySelector("[data-role=stage-msg]");
    if (el) {
      el.textContent = text;
      el.className = `msg ${kind}`;
      el.setAttribute("data-role", "stage-msg");
    }
  }

  private renderStages(job: Job): void {
    const done = new Set(STAGES.filter((s) => job.stages[s].state === "done"));
    const rows = STAGES.map((stage, i) => {
      const status = job.stages[stage];
      const startable = status.state === "pending" && STAGES.slice(0, i).every((s) => done.has(s));
      const buttons: string[] = [];
      if (startable) {
        buttons.push(`<button data-stage="${stage}" data-op="start">Start</button>`);
      }
      if (status.state === "awaiting_approval") {
        buttons.push(`<button data-stage="${stage}" data-op="approve">Approve</button>`);
        buttons.push(`<button data-stage="${stage}" data-op="reject">Reject</button>`);
      }
      return `
        <div class="stage-row" data-stage-row="${stage}">
          ${stageBadge(stage, status.state)}
          ${status.approval_required ? `<span class="muted">gated</span>` : ""}
          ${buttons.join(" ")}
          ${status.error ? `<span class="msg err">${escapeHtml(status.error)}</span>` : ""}
        </div>`;
    });
    (this.root.querySelector("[data-role=stages]") as HTMLElement).innerHTML =
      rows.join("") + `<span class="msg muted" data-role="stage-msg"></span>`;
  }

  private showBanner(html: string): void {
    const banner = this.root.querySelector("[data-role=banner]") as HTMLElement | null;
    if (banner) {
      banner.innerHTML = html;
      banner.classList.remove("hidden");
    }
  }

  private hideBanner(): void {
    this.root.querySelector("[data-role=banner]")?.classList.add("hidden");
  }
}
