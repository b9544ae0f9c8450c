/** In-progress annotation form state, kept separate from the DOM so the
 * completeness rules are unit-testable and survive fetch retries. */

import { initialRanking, Ranking } from "./ranking.js";
import { ASPECTS, Aspect, AnnotationPayload, ItemView } from "./types.js";

export interface FormState {
  itemId: string;
  assessorId: string;
  labels: string[];
  scores: Record<string, Partial<Record<Aspect, number>>>;
  ranking: Ranking;
}

export function emptyForm(item: ItemView, assessorId: string): FormState {
  const labels = item.candidates.map((c) => c.blinded_label);
  const scores: FormState["scores"] = {};
  for (const label of labels) {
    scores[label] = {};
  }
  return {
    itemId: item.item_id,
    assessorId,
    labels,
    scores,
    ranking: initialRanking(labels),
  };
}

export function setScore(
  state: FormState,
  label: string,
  aspect: Aspect,
  value: number,
): FormState {
  return {
    ...state,
    scores: { ...state.scores, [label]: { ...state.scores[label], [aspect]: value } },
  };
}

export function setRanking(state: FormState, ranking: Ranking): FormState {
  return { ...state, ranking };
}

export interface MissingScore {
  label: string;
  aspect: Aspect;
}

export function missingScores(state: FormState): MissingScore[] {
  const missing: MissingScore[] = [];
  for (const label of state.labels) {
    for (const aspect of ASPECTS) {
      const value = state.scores[label]?.[aspect];
      if (!Number.isInteger(value) || (value as number) < 1 || (value as number) > 4) {
        missing.push({ label, aspect });
      }
    }
  }
  return missing;
}

export function isComplete(state: FormState): boolean {
  return missingScores(state).length === 0 && state.ranking.length === state.labels.length;
}

export function toPayload(state: FormState): AnnotationPayload {
  const scores: AnnotationPayload["scores"] = {};
  for (const label of state.labels) {
    scores[label] = {
      layness: state.scores[label]?.layness ?? 0,
      fluency: state.scores[label]?.fluency ?? 0,
      relevance: state.scores[label]?.relevance ?? 0,
    };
  }
  return {
    assessor_id: state.assessorId,
    item_id: state.itemId,
    scores,
    ranking: [...state.ranking],
  };
}
