export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function shortHash(digest: string): string {
  return digest.slice(0, 10);
}

export function stageBadge(stage: string, state: string): string {
  return `<span class="badge badge-${escapeHtml(state)}" data-stage="${escapeHtml(stage)}">${escapeHtml(
    stage,
  )}: ${escapeHtml(state.replaceAll("_", " "))}</span>`;
}
