/** Ranking widget state: an ordered list of the four blinded labels.
 *
 * Every operation is remove-then-insert, so the state is a strict total
 * order by construction: a label can never occupy two slots and no slot
 * can hold two labels.
 */

export type Ranking = string[];

export function initialRanking(labels: string[]): Ranking {
  return [...labels];
}

export function isStrictPermutation(ranking: Ranking, labels: string[]): boolean {
  return (
    ranking.length === labels.length &&
    [...ranking].sort().join(",") === [...labels].sort().join(",")
  );
}

/** Move `label` so it ends up at `position` (0-based), shifting the rest. */
export function moveToPosition(ranking: Ranking, label: string, position: number): Ranking {
  const from = ranking.indexOf(label);
  if (from < 0) {
    return ranking;
  }
  const clamped = Math.max(0, Math.min(position, ranking.length - 1));
  const next = ranking.filter((entry) => entry !== label);
  next.splice(clamped, 0, label);
  return next;
}

export function moveUp(ranking: Ranking, label: string): Ranking {
  return moveToPosition(ranking, label, ranking.indexOf(label) - 1);
}

export function moveDown(ranking: Ranking, label: string): Ranking {
  return moveToPosition(ranking, label, ranking.indexOf(label) + 1);
}
