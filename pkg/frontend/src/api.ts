/** Coordinator API client.
 *
 * Every parsed response passes through the privacy scanner before it is
 * handed to the views; for density-mode tasks a response that carries
 * foreign per-point records is rejected outright.
 */

import { assertDensityResponseClean } from "./privacy.js";
import type { ArtifactRecord, DensityRecord, TaskRecord } from "./types.js";

export interface ConsumedResponse {
  label: string;
  body: unknown;
}

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(`coordinator returned ${status}: ${detail}`);
    this.status = status;
  }
}

export class CoordinatorApi {
  readonly baseUrl: string;
  readonly viewer: string;
  /** Every response body this client consumed, for privacy audits. */
  readonly consumed: ConsumedResponse[] = [];

  constructor(baseUrl: string, viewer: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.viewer = viewer;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    const body = (await response.json()) as T & { error?: string };
    if (!response.ok) {
      throw new ApiError(response.status, body?.error ?? response.statusText);
    }
    this.consumed.push({ label: path, body });
    return body;
  }

  listTasks(): Promise<TaskRecord[]> {
    return this.request<TaskRecord[]>("/tasks");
  }

  getTask(taskId: string): Promise<TaskRecord> {
    return this.request<TaskRecord>(`/tasks/${taskId}`);
  }

  join(taskId: string, endpoint: unknown): Promise<TaskRecord> {
    return this.request<TaskRecord>(`/tasks/${taskId}/join`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ participant_id: this.viewer, endpoint }),
    });
  }

  propose(config: unknown, title: string, description: string): Promise<TaskRecord> {
    return this.request<TaskRecord>("/tasks", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ config, title, description, proposer: this.viewer }),
    });
  }

  async artifact(taskId: string): Promise<ArtifactRecord> {
    const body = await this.request<ArtifactRecord>(
      `/tasks/${taskId}/artifact?participant=${encodeURIComponent(this.viewer)}`,
    );
    if (body.mode === "density") {
      assertDensityResponseClean(body, this.viewer, `artifact ${taskId}`);
    }
    return body;
  }

  async density(taskId: string): Promise<DensityRecord> {
    const body = await this.request<DensityRecord>(
      `/tasks/${taskId}/density?participant=${encodeURIComponent(this.viewer)}`,
    );
    if (body.mode === "density") {
      assertDensityResponseClean(body, this.viewer, `density ${taskId}`);
    }
    return body;
  }
}
