/** Typed client for the session service HTTP+JSON API. */

export interface Candidate {
  side: "i" | "j";
  params: Record<string, number>;
}

export interface PairPayload {
  session_id: string;
  nonce: string;
  iteration: number;
  budget: number;
  render_template: string;
  candidates: Candidate[];
}

export interface CompletedPayload {
  session_id: string;
  status: "completed";
  iteration: number;
  budget: number;
}

export type ChoiceResponse = (PairPayload & { status: "active" }) | CompletedPayload;

export interface BestPayload {
  session_id: string;
  best: {
    params: Record<string, number>;
    render_template: string;
    posterior_mean: number;
  } | null;
}

export interface ParameterDef {
  name: string;
  lo: number;
  hi: number;
  label?: string;
}

export interface CreateSessionRequest {
  design_space: {
    parameters: ParameterDef[];
    render_template?: string;
    constraint?: string;
    lam?: number | null;
  };
  budget?: number;
  warm_points?: number;
  seed?: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  const body = await resp.json();
  if (!resp.ok) {
    throw new ApiError(resp.status, body?.detail ?? body?.message ?? resp.statusText);
  }
  return body as T;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  createSession(req: CreateSessionRequest): Promise<PairPayload> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  getPair(sessionId: string): Promise<PairPayload> {
    return request(`${this.baseUrl}/sessions/${sessionId}/pair`);
  }

  submitChoice(sessionId: string, nonce: string, winner: "i" | "j"): Promise<ChoiceResponse> {
    return request(`${this.baseUrl}/sessions/${sessionId}/choice`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ nonce, winner }),
    });
  }

  getBest(sessionId: string): Promise<BestPayload> {
    return request(`${this.baseUrl}/sessions/${sessionId}/best`);
  }
}
