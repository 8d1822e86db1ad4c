import type { GridData } from './types'

// Heatmap as a CSS grid of colored cells: renders identically in real
// browsers and in DOM emulation (no canvas dependency).

function rampColor(t: number): string {
  // dark blue -> teal -> yellow
  const stops: Array<[number, [number, number, number]]> = [
    [0.0, [24, 24, 96]],
    [0.5, [32, 160, 160]],
    [1.0, [250, 230, 80]],
  ]
  for (let i = 1; i < stops.length; i++) {
    const [t1, c1] = stops[i - 1]
    const [t2, c2] = stops[i]
    if (t <= t2) {
      const u = (t - t1) / (t2 - t1)
      const mix = c1.map((a, k) => Math.round(a + u * (c2[k] - a)))
      return `rgb(${mix[0]},${mix[1]},${mix[2]})`
    }
  }
  const last = stops[stops.length - 1][1]
  return `rgb(${last[0]},${last[1]},${last[2]})`
}

export function renderHeatmap(doc: Document, grid: GridData): HTMLElement {
  const container = doc.createElement('div')
  container.className = 'heatmap'
  const [nx, ny] = grid.shape.length === 2 ? grid.shape : [grid.shape[0], 1]
  const values = grid.mean
  let lo = Infinity
  let hi = -Infinity
  for (const v of values) {
    if (v < lo) lo = v
    if (v > hi) hi = v
  }
  const span = hi - lo > 0 ? hi - lo : 1
  container.style.display = 'grid'
  container.style.gridTemplateColumns = `repeat(${nx}, 1fr)`
  // values are laid out row-major over (x, y); display y upward
  for (let j = ny - 1; j >= 0; j--) {
    for (let i = 0; i < nx; i++) {
      const v = values[i * ny + j]
      const cell = doc.createElement('div')
      cell.className = 'heatmap-cell'
      cell.style.backgroundColor = rampColor((v - lo) / span)
      cell.title = v.toFixed(3)
      container.appendChild(cell)
    }
  }
  return container
}
