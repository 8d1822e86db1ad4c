import { readFileSync } from 'node:fs'
import { dirname, join } from 'node:path'
import { fileURLToPath } from 'node:url'
import type { FetchLike } from '../src/api'

export interface Exchange {
  name: string
  request: { method: string; path: string; body: unknown }
  response: { status: number; body: unknown }
}

export interface ContractFixture {
  seed: number
  session_placeholder: string
  exchanges: Exchange[]
}

export function loadContract(): ContractFixture {
  const here = dirname(fileURLToPath(import.meta.url))
  const raw = readFileSync(join(here, '..', 'fixtures', 'session-contract.json'), 'utf-8')
  return JSON.parse(raw) as ContractFixture
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  })
}

/** Fetch stub that serves recorded exchanges keyed by method+path (+body). */
export function contractFetch(fixture: ContractFixture): FetchLike & { calls: string[] } {
  const queue = [...fixture.exchanges]
  const fn = (async (input: string, init?: RequestInit) => {
    const method = init?.method ?? 'GET'
    fn.calls.push(`${method} ${input}`)
    const idx = queue.findIndex(
      (e) => e.request.method === method && input.endsWith(e.request.path),
    )
    if (idx < 0) {
      throw new Error(`no recorded exchange for ${method} ${input}`)
    }
    const [exchange] = queue.splice(idx, 1)
    return jsonResponse(exchange.response.status, exchange.response.body)
  }) as FetchLike & { calls: string[] }
  fn.calls = []
  return fn
}

/** Scripted fetch stub: responds from an explicit route table; counts calls. */
export function routedFetch(
  routes: Record<string, () => { status: number; body: unknown }>,
): FetchLike & { calls: string[] } {
  const fn = (async (input: string, init?: RequestInit) => {
    const method = init?.method ?? 'GET'
    const url = new URL(input, 'http://service.test')
    const key = `${method} ${url.pathname}`
    fn.calls.push(key)
    const handler = routes[key]
    if (!handler) {
      throw new TypeError(`network error: no route for ${key}`)
    }
    const { status, body } = handler()
    return jsonResponse(status, body)
  }) as FetchLike & { calls: string[] }
  fn.calls = []
  return fn
}
