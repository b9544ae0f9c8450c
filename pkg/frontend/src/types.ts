/** Payload shapes exchanged with the annotation service. */

export const BLINDED_LABELS = ["A", "B", "C", "D"] as const;
export const ASPECTS = ["layness", "fluency", "relevance"] as const;

export type BlindedLabel = (typeof BLINDED_LABELS)[number];
export type Aspect = (typeof ASPECTS)[number];

export interface CandidateView {
  blinded_label: string;
  summary: string;
}

export interface ItemView {
  item_id: string;
  abstract: string;
  candidates: CandidateView[];
  aspects: string[];
  protocol: Record<string, string>;
}

export interface ProgressView {
  completed: number;
  assigned: number;
}

export interface NextItemResponse {
  item: ItemView | null;
  done: boolean;
  progress: ProgressView;
}

export interface AspectScores {
  layness: number;
  fluency: number;
  relevance: number;
}

export interface AnnotationPayload {
  assessor_id: string;
  item_id: string;
  scores: Record<string, AspectScores>;
  ranking: string[];
  timestamp?: string;
}

export interface SubmitResult {
  status: number;
  body: Record<string, unknown>;
}
