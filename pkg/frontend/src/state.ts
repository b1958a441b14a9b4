/** Session flow state machine.
 *
 * One active request per session: while a submission is in flight the flow
 * is "submitting" and further choose() calls are ignored, so a double-click
 * results in exactly one submission.  The choice view is preference-only:
 * views built from this state expose candidate params and progress, never
 * feasibility numbers.
 */

import {
  ApiClient,
  BestPayload,
  CreateSessionRequest,
  PairPayload,
} from "./api.js";

export type Phase = "idle" | "loading" | "choosing" | "submitting" | "completed" | "error";

export interface FlowState {
  phase: Phase;
  sessionId: string | null;
  pair: PairPayload | null;
  best: BestPayload["best"] | null;
  error: string | null;
}

export class SessionFlow {
  private state: FlowState = {
    phase: "idle",
    sessionId: null,
    pair: null,
    best: null,
    error: null,
  };
  private listeners: Array<(s: FlowState) => void> = [];

  constructor(private api: ApiClient) {}

  getState(): FlowState {
    return this.state;
  }

  subscribe(fn: (s: FlowState) => void): void {
    this.listeners.push(fn);
  }

  private set(patch: Partial<FlowState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) fn(this.state);
  }

  /** Progress as "n of budget" where n counts completed choices. */
  progress(): { done: number; budget: number } {
    const p = this.state.pair;
    if (!p) return { done: 0, budget: 0 };
    return { done: p.iteration, budget: p.budget };
  }

  async start(req: CreateSessionRequest): Promise<void> {
    this.set({ phase: "loading", error: null });
    try {
      const pair = await this.api.createSession(req);
      this.set({ phase: "choosing", sessionId: pair.session_id, pair });
    } catch (e) {
      this.set({ phase: "error", error: String(e) });
    }
  }

  /** Reload the pending pair after a refresh; the service serves the
   *  identical pair and nonce. */
  async resume(sessionId: string): Promise<void> {
    this.set({ phase: "loading", sessionId, error: null });
    try {
      const pair = await this.api.getPair(sessionId);
      this.set({ phase: "choosing", pair });
    } catch (e) {
      this.set({ phase: "error", error: String(e) });
    }
  }

  async choose(side: "i" | "j"): Promise<void> {
    if (this.state.phase !== "choosing" || !this.state.pair || !this.state.sessionId) {
      return; // in flight or not ready: ignore (double-click guard)
    }
    const { sessionId, pair } = this.state as { sessionId: string; pair: PairPayload };
    this.set({ phase: "submitting" });
    try {
      const resp = await this.api.submitChoice(sessionId, pair.nonce, side);
      if (resp.status === "completed") {
        const best = await this.api.getBest(sessionId);
        this.set({ phase: "completed", pair: null, best: best.best });
      } else {
        this.set({ phase: "choosing", pair: resp });
      }
    } catch (e) {
      this.set({ phase: "error", error: String(e) });
    }
  }
}
