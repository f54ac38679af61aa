import { Client } from "./api";
import { escapeHtml, stageBadge } from "./dom";
import { Job, STAGES } from "./types";

export interface BoardOptions {
  intervalMs?: number;
  onOpen: (jobId: string) => void;
}

/** Job list with stage badges. Polls the service; data is marked stale and a
 * banner is shown whenever the last poll failed. */
export class JobBoard {
  readonly root: HTMLElement;
  private readonly client: Client;
  private readonly opts: Required<BoardOptions>;
  private timer: ReturnType<typeof setInterval> | null = null;
  private lastGoodAt: string | null = null;

  constructor(root: HTMLElement, client: Client, opts: BoardOptions) {
    this.root = root;
    this.client = client;
    this.opts = { intervalMs: 2000, ...opts };
    this.root.innerHTML = `
      <div class="banner hidden" data-role="banner"></div>
      <div class="toolbar">
        <button data-role="new-demo">New demo job</button>
        <span class="muted" data-role="poll-note">polling every ${this.opts.intervalMs / 1000}s</span>
      </div>
      <div data-role="rows" class="job-rows"><div class="muted">loading…</div></div>`;
    this.rowsEl.addEventListener("click", (e) => {
      const row = (e.target as HTMLElement).closest<HTMLElement>("[data-job]");
      if (row) this.opts.onOpen(row.dataset.job as string);
    });
    (this.root.querySelector("[data-role=new-demo]") as HTMLButtonElement).addEventListener(
      "click",
      () => void this.createDemo(),
    );
  }

  private get rowsEl(): HTMLElement {
    return this.root.querySelector("[data-role=rows]") as HTMLElement;
  }

  private get bannerEl(): HTMLElement {
    return this.root.querySelector("[data-role=banner]") as HTMLElement;
  }

  start(): void {
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.opts.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  async createDemo(): Promise<void> {
    try {
      const job = await this.client.createDemoJob();
      await this.tick();
      this.opts.onOpen(job.job_id);
    } catch (err) {
      this.showBanner(`could not create job: ${escapeHtml(err)}`);
    }
  }

  async tick(): Promise<void> {
    let jobs: Job[];
    try {
      jobs = await this.client.listJobs();
    } catch (err) {
      this.showBanner(
        `service unreachable (${escapeHtml(err)})` +
          (this.lastGoodAt ? ` — showing data from ${escapeHtml(this.lastGoodAt)}` : ""),
      );
      this.rowsEl.classList.add("stale");
      return;
    }
    this.bannerEl.classList.add("hidden");
    this.rowsEl.classList.remove("stale");
    this.lastGoodAt = new Date().toISOString();
    this.renderRows(jobs);
  }

  private showBanner(html: string): void {
    this.bannerEl.innerHTML = html;
    this.bannerEl.classList.remove("hidden");
  }

  private renderRows(jobs: Job[]): void {
    if (!jobs.length) {
      this.rowsEl.innerHTML = `<div class="muted">no jobs yet — create one above</div>`;
      return;
    }
    this.rowsEl.innerHTML = jobs
      .map(
        (job) => `
        <div class="job-row" data-job="${escapeHtml(job.job_id)}">
          <div class="job-main">
            <div class="job-title">${escapeHtml(job.job_id)}</div>
            <div class="muted">seed ${job.seed} · ${job.parts.length} parts · created ${escapeHtml(job.created_at)}</div>
          </div>
          <div class="job-badges">
            ${STAGES.map((s) => stageBadge(s, job.stages[s].state)).join(" ")}
          </div>
        </div>`,
      )
      .join("");
  }
}
