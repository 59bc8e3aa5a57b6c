// Line-based diff for proposal review. Proposals are wholesale rewrites of
// deep memory, so a readable line diff beats any word-level cleverness.

export type DiffKind = "same" | "removed" | "added";

export interface DiffLine {
  kind: DiffKind;
  text: string;
  leftNumber: number | null;
  rightNumber: number | null;
}

// Longest-common-subsequence over lines, classic O(n*m) table. Deep memory
// stays a few thousand lines at most, so quadratic is fine.
export function diffLines(before: string, after: string): DiffLine[] {
  const a = before.split("\n");
  const b = after.split("\n");
  const n = a.length;
  const m = b.length;
  const lcs: number[][] = Array.from({ length: n + 1 }, () =>
    new Array<number>(m + 1).fill(0)
  );
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      lcs[i]![j] =
        a[i] === b[j]
          ? lcs[i + 1]![j + 1]! + 1
          : Math.max(lcs[i + 1]![j]!, lcs[i]![j + 1]!);
    }
  }
  const lines: DiffLine[] = [];
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (a[i] === b[j]) {
      lines.push({ kind: "same", text: a[i]!, leftNumber: i + 1, rightNumber: j + 1 });
      i++;
      j++;
    } else if (lcs[i + 1]![j]! >= lcs[i]![j + 1]!) {
      lines.push({ kind: "removed", text: a[i]!, leftNumber: i + 1, rightNumber: null });
      i++;
    } else {
      lines.push({ kind: "added", text: b[j]!, leftNumber: null, rightNumber: j + 1 });
      j++;
    }
  }
  for (; i < n; i++) {
    lines.push({ kind: "removed", text: a[i]!, leftNumber: i + 1, rightNumber: null });
  }
  for (; j < m; j++) {
    lines.push({ kind: "added", text: b[j]!, leftNumber: null, rightNumber: j + 1 });
  }
  return lines;
}

export interface DiffStats {
  added: number;
  removed: number;
  unchanged: number;
}

export function diffStats(lines: DiffLine[]): DiffStats {
  const stats: DiffStats = { added: 0, removed: 0, unchanged: 0 };
  for (const line of lines) {
    if (line.kind === "added") stats.added++;
    else if (line.kind === "removed") stats.removed++;
    else stats.unchanged++;
  }
  return stats;
}
