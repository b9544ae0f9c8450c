/** Client-side annotation validation.
 *
 * Mirrors the server's rules exactly; the contract test drives both sides
 * with the same fixture payloads. Field names in problems match the DOM
 * ids used for highlighting.
 */

import { ASPECTS, BLINDED_LABELS } from "./types.js";

export interface Problem {
  field: string;
  message: string;
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function sameMembers(a: string[], b: readonly string[]): boolean {
  return a.length === b.length && [...a].sort().join(",") === [...b].sort().join(",");
}

export function validateAnnotation(payload: unknown): Problem[] {
  const problems: Problem[] = [];
  if (!isRecord(payload)) {
    return [{ field: "payload", message: "annotation must be an object" }];
  }
  if (typeof payload.assessor_id !== "string" || payload.assessor_id === "") {
    problems.push({ field: "assessor_id", message: "assessor id is required" });
  }
  if (typeof payload.item_id !== "string" || payload.item_id === "") {
    problems.push({ field: "item_id", message: "item id is required" });
  }

  const scores = payload.scores;
  if (!isRecord(scores)) {
    problems.push({ field: "scores", message: "scores are required" });
  } else {
    if (!sameMembers(Object.keys(scores), BLINDED_LABELS)) {
      problems.push({
        field: "scores",
        message: `scores must cover exactly candidates ${BLINDED_LABELS.join(", ")}`,
      });
    }
    for (const [label, aspects] of Object.entries(scores)) {
      if (!isRecord(aspects)) {
        problems.push({ field: `scores.${label}`, message: "scores missing" });
        continue;
      }
      if (!sameMembers(Object.keys(aspects), ASPECTS)) {
        problems.push({
          field: `scores.${label}`,
          message: `candidate ${label} needs ${ASPECTS.join(", ")} scores`,
        });
      }
      for (const aspect of ASPECTS) {
        const value = aspects[aspect];
        if (!Number.isInteger(value) || (value as number) < 1 || (value as number) > 4) {
          problems.push({
            field: `score-${label}-${aspect}`,
            message: `candidate ${label} ${aspect} score must be 1-4`,
          });
        }
      }
    }
  }

  const ranking = payload.ranking;
  if (!Array.isArray(ranking) || !sameMembers(ranking as string[], BLINDED_LABELS)) {
    problems.push({
      field: "ranking",
      message: `ranking must order each of ${BLINDED_LABELS.join(", ")} exactly once`,
    });
  }
  return problems;
}

export function isValidAnnotation(payload: unknown): boolean {
  return validateAnnotation(payload).length === 0;
}
