import { describe, expect, it } from "vitest";

import { diffLines, diffStats } from "../src/diff.js";

describe("diffLines", () => {
  it("marks identical text as unchanged", () => {
    const lines = diffLines("a\nb\nc", "a\nb\nc");
    expect(lines.map((l) => l.kind)).toEqual(["same", "same", "same"]);
    expect(lines.map((l) => [l.leftNumber, l.rightNumber])).toEqual([
      [1, 1],
      [2, 2],
      [3, 3],
    ]);
  });

  it("reports removals and additions with one-sided numbering", () => {
    const lines = diffLines("keep\ndrop me\nend", "keep\nnew line\nend");
    expect(lines.map((l) => l.kind)).toEqual([
      "same",
      "removed",
      "added",
      "same",
    ]);
    const removed = lines[1]!;
    const added = lines[2]!;
    expect(removed.text).toBe("drop me");
    expect(removed.rightNumber).toBeNull();
    expect(added.text).toBe("new line");
    expect(added.leftNumber).toBeNull();
  });

  it("finds the common subsequence across a rewrite", () => {
    const before = "alpha\nbeta\ngamma\ndelta";
    const after = "beta\ninserted\ndelta";
    const lines = diffLines(before, after);
    const kept = lines.filter((l) => l.kind === "same").map((l) => l.text);
    expect(kept).toEqual(["beta", "delta"]);
  });

  it("handles a full replacement", () => {
    const lines = diffLines("old only", "entirely new");
    expect(lines.map((l) => l.kind).sort()).toEqual(["added", "removed"]);
  });

  it("treats empty sides as pure addition or removal", () => {
    expect(diffLines("", "x").map((l) => l.kind)).toContain("added");
    expect(diffLines("x", "").map((l) => l.kind)).toContain("removed");
  });

  it("round-trips: same lines reconstruct both sides in order", () => {
    const before = "a\nb\nc\nd\ne";
    const after = "a\nc\nq\ne";
    const lines = diffLines(before, after);
    const left = lines.filter((l) => l.kind !== "added").map((l) => l.text);
    const right = lines.filter((l) => l.kind !== "removed").map((l) => l.text);
    expect(left.join("\n")).toBe(before);
    expect(right.join("\n")).toBe(after);
  });
});

describe("diffStats", () => {
  it("counts each kind", () => {
    const stats = diffStats(diffLines("a\nb\nc", "a\nx\nc\ny"));
    expect(stats).toEqual({ added: 2, removed: 1, unchanged: 2 });
  });
});
