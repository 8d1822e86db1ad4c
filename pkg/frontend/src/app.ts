import { ApiError, SessionApi, type FetchLike } from './api'
import { renderHeatmap } from './heatmap'
import type {
  CreateSessionRequest,
  DuelResponse,
  EstimateResponse,
  SessionInfo,
} from './types'

export interface AppOptions {
  baseUrl: string
  fetchFn?: FetchLike
  retryDelayMs?: number
}

// Single-page duel loop. Every render reflects the last server responses;
// the app never computes model quantities client-side.
export class DuelApp {
  private readonly doc: Document
  readonly root: HTMLElement
  private readonly api: SessionApi
  private readonly retryDelayMs: number

  private session: SessionInfo | null = null
  private duel: DuelResponse | null = null
  private estimate: EstimateResponse | null = null
  private busy = false
  private fitting = false
  private errorMessage: string | null = null
  private lastAction: Promise<void> = Promise.resolve()
  feedbackRequests = 0

  constructor(doc: Document, root: HTMLElement, opts: AppOptions) {
    this.doc = doc
    this.root = root
    this.api = new SessionApi(opts.baseUrl, opts.fetchFn)
    this.retryDelayMs = opts.retryDelayMs ?? 800
    this.render()
  }

  // test hook: resolves once in-flight work (including chained refreshes) settles
  async settle(): Promise<void> {
    let previous
    do {
      previous = this.lastAction
      await previous.catch(() => undefined)
    } while (previous !== this.lastAction)
  }

  private run(action: () => Promise<void>): Promise<void> {
    if (this.busy) {
      return this.lastAction
    }
    this.busy = true
    this.errorMessage = null
    this.render()
    const task = action()
      .catch((err) => {
        if (err instanceof ApiError && err.retryLater) {
          this.fitting = true
        } else {
          this.errorMessage = err instanceof Error ? err.message : String(err)
        }
      })
      .then(() => {
        this.busy = false
        this.render() // fitting spinner stays visible until the retry runs
        if (this.fitting) {
          this.fitting = false
          setTimeout(() => {
            this.lastAction = this.run(action)
          }, this.retryDelayMs)
        }
      })
    this.lastAction = task
    return task
  }

  start(req: CreateSessionRequest): Promise<void> {
    return this.run(async () => {
      this.session = await this.api.createSession(req)
      this.estimate = await this.api.getEstimate(this.session.session)
      this.duel = await this.api.nextDuel(this.session.session)
    })
  }

  chooseOption(winner: 1 | 2): Promise<void> {
    if (this.busy || !this.session || !this.duel) {
      return this.lastAction
    }
    const sid = this.session.session
    this.feedbackRequests += 1
    return this.run(async () => {
      await this.api.submitFeedback(sid, winner)
      this.duel = null
      this.estimate = await this.api.getEstimate(sid)
      this.duel = await this.api.nextDuel(sid)
    })
  }

  private startFromForm(): void {
    const val = (role: string) =>
      (this.root.querySelector(`[data-role="${role}"]`) as HTMLInputElement).value
    const dim = Math.max(1, Math.min(10, Number(val('setup-dim')) || 2))
    const lower = Number(val('setup-lower')) || 0
    const upper = Number(val('setup-upper')) || 1
    const method = val('setup-method') as CreateSessionRequest['method']
    const seedRaw = val('setup-seed').trim()
    const req: CreateSessionRequest = {
      domain: {
        lower: Array(dim).fill(lower),
        upper: Array(dim).fill(upper),
      },
      method,
    }
    if (seedRaw !== '') {
      req.config = { seed: Number(seedRaw) }
    }
    void this.start(req)
  }

  render(): void {
    this.root.textContent = ''
    const app = this.doc.createElement('div')
    app.className = 'duel-app'

    if (this.errorMessage) {
      const banner = this.doc.createElement('div')
      banner.className = 'banner banner-error'
      banner.setAttribute('data-role', 'error')
      banner.textContent = `Request failed: ${this.errorMessage} (retry with your next action)`
      app.appendChild(banner)
    }
    if (this.fitting) {
      const spinner = this.doc.createElement('div')
      spinner.className = 'spinner'
      spinner.setAttribute('data-role', 'fitting')
      spinner.textContent = 'Model is fitting, retrying shortly...'
      app.appendChild(spinner)
    }

    if (!this.session) {
      app.appendChild(this.renderSetup())
    } else {
      if (this.duel) {
        app.appendChild(this.renderDuel(this.duel))
      } else if (!this.fitting) {
        const waiting = this.doc.createElement('div')
        waiting.setAttribute('data-role', 'waiting')
        waiting.textContent = this.busy ? 'Working...' : 'No duel pending.'
        app.appendChild(waiting)
      }
      if (this.estimate) {
        app.appendChild(this.renderEstimate(this.estimate))
      }
    }
    this.root.appendChild(app)
  }

  private renderSetup(): HTMLElement {
    const form = this.doc.createElement('div')
    form.className = 'setup'
    form.setAttribute('data-role', 'setup')

    const fields: Array<[string, string, string]> = [
      ['setup-dim', 'Dimensions', '2'],
      ['setup-lower', 'Lower bound', '0'],
      ['setup-upper', 'Upper bound', '1'],
      ['setup-seed', 'Seed (optional)', ''],
    ]
    for (const [role, label, value] of fields) {
      const wrap = this.doc.createElement('label')
      wrap.textContent = `${label}: `
      const input = this.doc.createElement('input')
      input.setAttribute('data-role', role)
      input.value = value
      wrap.appendChild(input)
      form.appendChild(wrap)
    }
    const methodWrap = this.doc.createElement('label')
    methodWrap.textContent = 'Method: '
    const select = this.doc.createElement('select')
    select.setAttribute('data-role', 'setup-method')
    for (const m of ['kg', 'eubo', 'logei', 'random']) {
      const opt = this.doc.createElement('option')
      opt.value = m
      opt.textContent = m
      select.appendChild(opt)
    }
    methodWrap.appendChild(select)
    form.appendChild(methodWrap)

    const button = this.doc.createElement('button')
    button.setAttribute('data-role', 'setup-start')
    button.textContent = 'Start session'
    button.addEventListener('click', () => this.startFromForm())
    form.appendChild(button)
    return form
  }

  private renderDuel(duel: DuelResponse): HTMLElement {
    const section = this.doc.createElement('section')
    section.className = 'duel'
    section.setAttribute('data-role', 'duel')
    const labels = duel.labels
    const options: Array<[1 | 2, number[]]> = [
      [1, duel.x1],
      [2, duel.x2],
    ]
    for (const [winner, point] of options) {
      const card = this.doc.createElement('div')
      card.className = 'card'
      card.setAttribute('data-role', `option-${winner}`)
      const title = this.doc.createElement('h3')
      title.textContent = winner === 1 ? 'Option A' : 'Option B'
      card.appendChild(title)
      const list = this.doc.createElement('dl')
      point.forEach((v, i) => {
        const dt = this.doc.createElement('dt')
        dt.textContent = labels[i] ?? `x${i + 1}`
        const dd = this.doc.createElement('dd')
        dd.textContent = v.toFixed(4)
        list.appendChild(dt)
        list.appendChild(dd)
      })
      card.appendChild(list)
      const button = this.doc.createElement('button')
      button.setAttribute('data-role', `choose-${winner}`)
      button.textContent = winner === 1 ? 'Prefer A' : 'Prefer B'
      button.disabled = this.busy
      button.addEventListener('click', () => void this.chooseOption(winner))
      card.appendChild(button)
      section.appendChild(card)
    }
    return section
  }

  private renderEstimate(est: EstimateResponse): HTMLElement {
    const section = this.doc.createElement('section')
    section.className = 'estimate'
    section.setAttribute('data-role', 'estimate')

    const readout = this.doc.createElement('p')
    readout.setAttribute('data-role', 'estimate-value')
    const coords = est.xhat.map((v) => v.toFixed(4)).join(', ')
    readout.textContent = `Current best estimate: (${coords})`
    section.appendChild(readout)

    if (est.flat) {
      const note = this.doc.createElement('p')
      note.setAttribute('data-role', 'flat-note')
      note.textContent = 'No feedback yet: the model is a flat zero-mean prior.'
      section.appendChild(note)
    }

    if (est.grid) {
      const box = this.doc.createElement('div')
      box.setAttribute('data-role', 'heatmap')
      box.appendChild(renderHeatmap(this.doc, est.grid))
      section.appendChild(box)
    }

    const historyTitle = this.doc.createElement('h3')
    historyTitle.textContent = `History (${est.history.length})`
    section.appendChild(historyTitle)
    const list = this.doc.createElement('ol')
    list.setAttribute('data-role', 'history')
    for (const entry of est.history) {
      const item = this.doc.createElement('li')
      item.setAttribute('data-role', 'history-entry')
      item.textContent = `#${entry.index + 1}: chose option ${entry.winner === 1 ? 'A' : 'B'}`
      list.appendChild(item)
    }
    section.appendChild(list)
    return section
  }
}
