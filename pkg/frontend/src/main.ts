import { DuelApp } from './app'

// Base URL comes from ?service=... or defaults to same origin.
const params = new URLSearchParams(window.location.search)
const baseUrl = params.get('service') ?? ''

const root = document.getElementById('app')
if (!root) {
  throw new Error('missing #app mount point')
}
new DuelApp(document, root, { baseUrl })
