export interface ParsedMesh {
  positions: Float32Array; // xyz per vertex
  colors: Float32Array | null; // rgb in [0,1] per vertex, when the file has them
  triangles: Uint32Array;
}

/** Minimal OBJ parser: `v x y z [r g b]` and `f` lines (any polygon, fan
 * triangulated, `v/vt/vn` and negative indices accepted). Everything else
 * is ignored. */
export function parseObj(text: string): ParsedMesh {
  const positions: number[] = [];
  const colors: number[] = [];
  const triangles: number[] = [];
  let sawColor = false;

  for (const line of text.split("\n")) {
    const parts = line.trim().split(/\s+/);
    if (parts[0] === "v" && parts.length >= 4) {
      positions.push(+parts[1], +parts[2], +parts[3]);
      if (parts.length >= 7) {
        sawColor = true;
        colors.push(+parts[4], +parts[5], +parts[6]);
      } else {
        colors.push(0.7, 0.7, 0.7);
      }
    } else if (parts[0] === "f" && parts.length >= 4) {
      const index = (token: string): number => {
        const k = parseInt(token.split("/")[0], 10);
        return k < 0 ? positions.length / 3 + k : k - 1;
      };
      for (let i = 2; i < parts.length - 1; i++) {
        triangles.push(index(parts[1]), index(parts[i]), index(parts[i + 1]));
      }
    }
  }

  const n = positions.length / 3;
  for (const t of triangles) {
    if (!(t >= 0 && t < n)) throw new Error(`face index ${t} out of range (${n} vertices)`);
  }
  return {
    positions: Float32Array.from(positions),
    colors: sawColor ? Float32Array.from(colors) : null,
    triangles: Uint32Array.from(triangles),
  };
}
