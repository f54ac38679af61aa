import { describe, expect, it } from "vitest";

import { parseObj } from "../src/obj";

const CUBE = `o box
v 0 0 0 0.8 0.2 0.1
v 1 0 0 0.8 0.2 0.1
v 1 1 0 0.8 0.2 0.1
v 0 1 0 0.8 0.2 0.1
f 1 2 3 4
`;

describe("parseObj", () => {
  it("reads vertices with colors and fan-triangulates polygons", () => {
    const mesh = parseObj(CUBE);
    expect(mesh.positions).toHaveLength(12);
    expect(Array.from(mesh.triangles)).toEqual([0, 1, 2, 0, 2, 3]);
    expect(mesh.colors).not.toBeNull();
    expect(mesh.colors![0]).toBeCloseTo(0.8, 5);
  });

  it("handles v/vt/vn tokens and negative indices", () => {
    const text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 -2/2/2 -1/3/3\n";
    const mesh = parseObj(text);
    expect(Array.from(mesh.triangles)).toEqual([0, 1, 2]);
  });

  it("reports no colors when the file has plain vertices", () => {
    const mesh = parseObj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    expect(mesh.colors).toBeNull();
  });

  it("ignores comments, mtl directives and empty lines", () => {
    const text = "# header\nmtllib a.mtl\nusemtl m\n\nv 0 0 0\nv 1 0 0\nv 0 1 0\ns off\nf 1 2 3\n";
    const mesh = parseObj(text);
    expect(mesh.positions).toHaveLength(9);
    expect(mesh.triangles).toHaveLength(3);
  });

  it("rejects face indices that point past the vertex list", () => {
    expect(() => parseObj("v 0 0 0\nf 1 2 3\n")).toThrow(/out of range/);
  });
});
