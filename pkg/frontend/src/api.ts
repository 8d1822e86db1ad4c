import type {
  CreateSessionRequest,
  DuelResponse,
  EstimateResponse,
  ErrorBody,
  FeedbackResponse,
  HistoryResponse,
  SessionInfo,
} from './types'

export class ApiError extends Error {
  readonly status: number
  readonly code: string

  constructor(status: number, code: string, message: string) {
    super(message)
    this.status = status
    this.code = code
  }

  // the service signals "model is refitting, ask again shortly"
  get retryLater(): boolean {
    return this.status === 503 || this.code === 'fitting'
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>

export class SessionApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: 'GET' | 'POST', path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { 'Content-Type': 'application/json' } }
    if (body !== undefined) {
      init.body = JSON.stringify(body)
    }
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init)
    const payload = await resp.json().catch(() => null)
    if (!resp.ok) {
      const err = (payload ?? {}) as Partial<ErrorBody>
      throw new ApiError(resp.status, err.error ?? 'unknown', err.message ?? resp.statusText)
    }
    return payload as T
  }

  createSession(req: CreateSessionRequest): Promise<SessionInfo> {
    return this.request('POST', '/sessions', req)
  }

  nextDuel(sessionId: string): Promise<DuelResponse> {
    return this.request('GET', `/sessions/${sessionId}/next`)
  }

  submitFeedback(sessionId: string, winner: 1 | 2): Promise<FeedbackResponse> {
    return this.request('POST', `/sessions/${sessionId}/feedback`, { winner })
  }

  getEstimate(sessionId: string): Promise<EstimateResponse> {
    return this.request('GET', `/sessions/${sessionId}/estimate`)
  }

  getHistory(sessionId: string): Promise<HistoryResponse> {
    return this.request('GET', `/sessions/${sessionId}/history`)
  }
}
