/** Thin REST client for the annotation service.
 *
 * submitAnnotation resolves (never throws) for HTTP error statuses so the
 * caller can branch on 201/409/422; network failures reject and trigger
 * the retry banner.
 */

import { AnnotationPayload, NextItemResponse, SubmitResult } from "./types.js";

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async fetchNextItem(assessorId: string): Promise<NextItemResponse> {
    const url = `${this.baseUrl}/api/items/next?assessor=${encodeURIComponent(assessorId)}`;
    const response = await fetch(url);
    if (!response.ok) {
      throw new Error(`next item fetch failed: HTTP ${response.status}`);
    }
    return (await response.json()) as NextItemResponse;
  }

  async submitAnnotation(payload: AnnotationPayload): Promise<SubmitResult> {
    const response = await fetch(`${this.baseUrl}/api/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    const body = (await response.json().catch(() => ({}))) as Record<string, unknown>;
    return { status: response.status, body };
  }

  async fetchProgress(): Promise<Record<string, unknown>> {
    const response = await fetch(`${this.baseUrl}/api/progress`);
    if (!response.ok) {
      throw new Error(`progress fetch failed: HTTP ${response.status}`);
    }
    return (await response.json()) as Record<string, unknown>;
  }
}
