import { ApiError, Client } from "./api";
import { escapeHtml } from "./dom";
import { EDITABLE_PROMPT_FIELDS, EditableField, Job, PromptFields } from "./types";

interface CardState {
  base: string; // artifact hash the edit is based on
  server: PromptFields;
  dirty: boolean;
  conflict: PromptFields | null; // server copy that blocked the save
}

function fieldToText(prompt: PromptFields, name: EditableField): string {
  const value = prompt[name];
  return Array.isArray(value) ? value.join(", ") : String(value ?? "");
}

/** Per-part prompt editor. Saves are optimistic-locked on the artifact hash;
 * a concurrent server-side change blocks the save and shows both versions. */
export class PromptPane {
  readonly root: HTMLElement;
  private readonly client: Client;
  private readonly jobId: string;
  private readonly onSaved: () => void;
  private cards = new Map<string, CardState>();
  private notices = new Map<string, string>(); // survives the re-render a save triggers

  constructor(root: HTMLElement, client: Client, jobId: string, onSaved: () => void) {
    this.root = root;
    this.client = client;
    this.jobId = jobId;
    this.onSaved = onSaved;
    this.root.addEventListener("input", (e) => {
      const card = (e.target as HTMLElement).closest<HTMLElement>("[data-part]");
      if (!card) return;
      const state = this.cards.get(card.dataset.part as string);
      if (state) state.dirty = true;
    });
    this.root.addEventListener("click", (e) => {
      const button = (e.target as HTMLElement).closest<HTMLButtonElement>("button");
      const card = button?.closest<HTMLElement>("[data-part]");
      if (!button || !card) return;
      const partId = card.dataset.part as string;
      if (button.dataset.role === "save") void this.save(partId, card);
      if (button.dataset.role === "load-server") void this.loadServer(partId);
    });
  }

  /** Re-render from the manifest. Cards with unsaved edits are left alone so
   * polling never clobbers the operator's typing. */
  async update(job: Job): Promise<void> {
    for (const part of job.parts) {
      const pid = part.part_id;
      const ref = job.artifacts[`promptgen/${pid}`];
      let card = this.root.querySelector<HTMLElement>(`[data-part="${pid}"]`);
      if (!card) {
        card = document.createElement("div");
        card.className = "card prompt-card";
        card.dataset.part = pid;
        this.root.appendChild(card);
      }
      if (!ref) {
        this.cards.delete(pid);
        card.innerHTML = `
          <h3>${escapeHtml(part.display_name)}</h3>
          <div class="muted">no prompt yet — run promptgen</div>`;
        continue;
      }
      const state = this.cards.get(pid);
      if (state && (state.dirty || state.conflict || state.base === ref.hash)) continue;
      const server = await this.client.artifactJson<PromptFields>(ref.hash);
      this.cards.set(pid, { base: ref.hash, server, dirty: false, conflict: null });
      this.renderCard(card, part.display_name, server);
      const notice = this.notices.get(pid);
      if (notice) {
        this.notices.delete(pid);
        this.message(card, notice, "ok");
      }
    }
  }

  private renderCard(card: HTMLElement, title: string, prompt: PromptFields): void {
    card.innerHTML = `
      <h3>${escapeHtml(title)} <span class="muted mono">${escapeHtml(prompt.part_id)}</span></h3>
      ${EDITABLE_PROMPT_FIELDS.map(
        (name) => `
        <label class="field">
          <span>${escapeHtml(name.replaceAll("_", " "))}</span>
          <input type="text" data-field="${name}" value="${escapeHtml(
            fieldToText(prompt, name),
          )}">
        </label>`,
      ).join("")}
      <div class="row">
        <button data-role="save">Save prompt</button>
        <span class="msg" data-role="msg"></span>
      </div>
      <div data-role="conflict"></div>`;
  }

  private collect(card: HTMLElement): Record<string, unknown> {
    const state = this.cards.get(card.dataset.part as string) as CardState;
    const fields: Record<string, unknown> = {};
    for (const name of EDITABLE_PROMPT_FIELDS) {
      const input = card.querySelector<HTMLInputElement>(`[data-field="${name}"]`);
      if (!input) continue;
      if (name === "negative_terms") {
        const terms = input.value
          .split(",")
          .map((t) => t.trim())
          .filter(Boolean);
        if (terms.join(", ") !== state.server.negative_terms.join(", ")) fields[name] = terms;
      } else if (input.value !== state.server[name]) {
        fields[name] = input.value;
      }
    }
    return fields;
  }

  private message(card: HTMLElement, text: string, kind: "ok" | "err"): void {
    const msg = card.querySelector("[data-role=msg]") as HTMLElement;
    msg.textContent = text;
    msg.className = `msg ${kind}`;
  }

  private async save(partId: string, card: HTMLElement): Promise<void> {
    const state = this.cards.get(partId);
    if (!state) return;
    if (state.conflict) {
      this.message(card, "resolve the conflict first (load the server version)", "err");
      return;
    }
    const fields = this.collect(card);
    if (!Object.keys(fields).length) {
      this.message(card, "nothing changed", "ok");
      return;
    }
    try {
      await this.client.editPrompt(this.jobId, partId, fields, state.base);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409 && err.code === "StaleEdit") {
        await this.showConflict(partId, card, fields);
      } else if (err instanceof ApiError) {
        this.message(card, `${err.code}: ${err.message}`, "err");
      } else {
        this.message(card, String(err), "err");
      }
      return;
    }
    state.dirty = false;
    this.message(card, "saved — downstream stages reset", "ok");
    this.notices.set(partId, "saved — downstream stages reset");
    this.onSaved();
  }

  /** The save raced another writer: show the operator's value next to the
   * current server value for every contested field. No silent overwrite. */
  private async showConflict(
    partId: string,
    card: HTMLElement,
    attempted: Record<string, unknown>,
  ): Promise<void> {
    const state = this.cards.get(partId) as CardState;
    const job = await this.client.getJob(this.jobId);
    const ref = job.artifacts[`promptgen/${partId}`];
    const server = await this.client.artifactJson<PromptFields>(ref.hash);
    state.conflict = server;
    this.message(card, "conflict: the prompt changed on the server", "err");
    const rows = Object.keys(attempted)
      .map((name) => {
        const theirs = fieldToText(server, name as EditableField);
        const yours = Array.isArray(attempted[name])
          ? (attempted[name] as string[]).join(", ")
          : String(attempted[name]);
        return `<tr><td class="mono">${escapeHtml(name)}</td><td>${escapeHtml(
          yours,
        )}</td><td>${escapeHtml(theirs)}</td></tr>`;
      })
      .join("");
    (card.querySelector("[data-role=conflict]") as HTMLElement).innerHTML = `
      <div class="conflict">
        <table>
          <thead><tr><th>field</th><th>yours</th><th>server</th></tr></thead>
          <tbody>${rows}</tbody>
        </table>
        <button data-role="load-server">Load server version</button>
      </div>`;
  }

  private async loadServer(partId: string): Promise<void> {
    this.cards.delete(partId);
    await this.update(await this.client.getJob(this.jobId));
  }
}
