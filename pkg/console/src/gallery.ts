import { Client } from "./api";
import { escapeHtml } from "./dom";
import { parseObj } from "./obj";
import { Job, SceneManifest } from "./types";
import { MeshView, PlacedMesh } from "./view3d";

const VIEW_COUNT = 6;

function placeholder(text: string): string {
  return `<div class="placeholder">${escapeHtml(text)}</div>`;
}

/** Original image, per-part isolations, multiview grids and mesh previews.
 * Every tile renders from an artifact ref in the job manifest; anything the
 * pipeline has not produced yet stays a placeholder. */
export class Gallery {
  readonly root: HTMLElement;
  private readonly client: Client;
  private meshViews = new Map<string, MeshView>();
  private meshKeys = new Map<string, string>();
  private imageKey = "";
  private viewsKey = "";

  constructor(root: HTMLElement, client: Client) {
    this.root = root;
    this.client = client;
    this.root.innerHTML = `
      <h3>Images</h3>
      <div class="tile-row" data-role="images"></div>
      <h3>Multiview sheets</h3>
      <div data-role="views"></div>
      <h3>Meshes</h3>
      <div class="tile-row" data-role="meshes"></div>`;
  }

  private section(role: string): HTMLElement {
    return this.root.querySelector(`[data-role=${role}]`) as HTMLElement;
  }

  async update(job: Job): Promise<void> {
    this.renderImages(job);
    this.renderViews(job);
    await this.renderMeshes(job);
  }

  private renderImages(job: Job): void {
    const refs = job.parts.map((p) => job.artifacts[`isolation/${p.part_id}`]?.hash ?? "");
    const key = [job.input_image, ...refs].join("|");
    if (key === this.imageKey) return;
    this.imageKey = key;
    const cards = [
      `<figure class="tile">
         <img src="${this.client.artifactUrl(job.input_image)}" alt="input image">
         <figcaption>input</figcaption>
       </figure>`,
    ];
    for (const part of job.parts) {
      const ref = job.artifacts[`isolation/${part.part_id}`];
      cards.push(
        `<figure class="tile" data-isolation="${escapeHtml(part.part_id)}">
           ${
             ref
               ? `<img src="${this.client.artifactUrl(ref.hash)}" alt="isolated ${escapeHtml(part.part_id)}">`
               : placeholder("isolation pending")
           }
           <figcaption>${escapeHtml(part.display_name)} isolated</figcaption>
         </figure>`,
      );
    }
    this.section("images").innerHTML = cards.join("");
  }

  private renderViews(job: Job): void {
    const key = job.parts
      .map((p) =>
        Array.from({ length: VIEW_COUNT }, (_, k) => job.artifacts[`multiview/${p.part_id}/view${k}`]?.hash ?? "").join(","),
      )
      .join("|");
    if (key === this.viewsKey) return;
    this.viewsKey = key;
    this.section("views").innerHTML = job.parts
      .map((part) => {
        const tiles = Array.from({ length: VIEW_COUNT }, (_, k) => {
          const ref = job.artifacts[`multiview/${part.part_id}/view${k}`];
          return ref
            ? `<img src="${this.client.artifactUrl(ref.hash)}" alt="${escapeHtml(part.part_id)} view ${k}">`
            : placeholder(`view ${k}`);
        }).join("");
        return `
          <div class="view-grid-wrap" data-views="${escapeHtml(part.part_id)}">
            <div class="muted">${escapeHtml(part.display_name)}</div>
            <div class="view-grid">${tiles}</div>
          </div>`;
      })
      .join("");
  }

  private meshSlot(name: string, label: string): HTMLElement {
    let slot = this.section("meshes").querySelector<HTMLElement>(`[data-mesh="${name}"]`);
    if (!slot) {
      slot = document.createElement("div");
      slot.className = "tile mesh-tile";
      slot.dataset.mesh = name;
      slot.innerHTML = `<div class="muted">${escapeHtml(label)}</div>`;
      this.section("meshes").appendChild(slot);
    }
    return slot;
  }

  private view(name: string, slot: HTMLElement): MeshView {
    let view = this.meshViews.get(name);
    if (!view) {
      view = new MeshView(slot);
      this.meshViews.set(name, view);
    }
    return view;
  }

  private async renderMeshes(job: Job): Promise<void> {
    for (const part of job.parts) {
      const slot = this.meshSlot(part.part_id, `${part.display_name} mesh`);
      const ref = job.artifacts[`assembly/${part.part_id}/mesh.obj`];
      if (!ref) {
        if (!this.meshViews.has(part.part_id)) {
          slot.querySelector(".placeholder")?.remove();
          slot.insertAdjacentHTML("beforeend", placeholder("mesh pending"));
        }
        continue;
      }
      if (this.meshKeys.get(part.part_id) === ref.hash) continue;
      const mesh = parseObj(await this.client.artifactText(ref.hash));
      slot.querySelector(".placeholder")?.remove();
      this.view(part.part_id, slot).setMeshes([{ mesh, scale: 1, translation: [0, 0, 0] }]);
      this.meshKeys.set(part.part_id, ref.hash);
    }
    await this.renderAssembled(job);
  }

  /** The assembled preview applies the scene manifest's per-part scale and
   * translation to the raw reconstruction meshes, so what is on screen is
   * exactly what the manifest says. */
  private async renderAssembled(job: Job): Promise<void> {
    const slot = this.meshSlot("__scene__", "assembled scene");
    const manifestRef = job.artifacts["assembly/scene.json"];
    const reconRefs = job.parts.map((p) => job.artifacts[`reconstruction/${p.part_id}/mesh.obj`]);
    if (!manifestRef || reconRefs.some((r) => !r)) {
      if (!this.meshViews.has("__scene__")) {
        slot.querySelector(".placeholder")?.remove();
        slot.insertAdjacentHTML("beforeend", placeholder("scene pending"));
      }
      return;
    }
    const key = [manifestRef.hash, ...reconRefs.map((r) => r!.hash)].join("|");
    if (this.meshKeys.get("__scene__") === key) return;
    const manifest = await this.client.sceneManifest(manifestRef.hash);
    const byPart = new Map(job.parts.map((p, i) => [p.part_id, reconRefs[i]!.hash]));
    const placed: PlacedMesh[] = [];
    for (const entry of (manifest as SceneManifest).parts) {
      const digest = byPart.get(entry.part_id);
      if (!digest) continue;
      placed.push({
        mesh: parseObj(await this.client.artifactText(digest)),
        scale: entry.scale,
        translation: entry.translation,
      });
    }
    slot.querySelector(".placeholder")?.remove();
    this.view("__scene__", slot).setMeshes(placed);
    this.meshKeys.set("__scene__", key);
  }
}
