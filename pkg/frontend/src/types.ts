// Wire types of the session service HTTP API. Points are arrays of numbers
// in domain units; errors arrive as {"error": code, "message": text}.

export interface DomainSpec {
  lower: number[]
  upper: number[]
}

export interface CreateSessionRequest {
  domain: DomainSpec
  labels?: string[]
  method?: 'kg' | 'eubo' | 'logei' | 'random'
  config?: { seed?: number }
}

export interface SessionInfo {
  session: string
  domain: DomainSpec
  labels: string[]
  method: string
  seed: number
  state: string
}

export interface DuelResponse {
  session: string
  x1: number[]
  x2: number[]
  labels: string[]
  duel_index: number
}

export interface EstimateCore {
  xhat: number[]
  value: number
  flat: boolean
}

export interface FeedbackResponse {
  session: string
  accepted: boolean
  n_feedback: number
  estimate: EstimateCore
}

export interface GridData {
  xs: number[]
  ys?: number[]
  shape: number[]
  mean: number[]
}

export interface HistoryEntry {
  index: number
  duel: { x1: number[]; x2: number[] }
  winner: number
  ts: number
}

export interface EstimateResponse extends EstimateCore {
  session: string
  history: HistoryEntry[]
  state: string
  grid?: GridData
}

export interface HistoryResponse {
  session: string
  history: HistoryEntry[]
}

export interface ErrorBody {
  error: string
  message: string
}
