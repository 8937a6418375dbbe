// Wiring: DOM events in, API calls out, re-render on every refresh. State is
// exactly the latest API responses; there is no derived store to drift.

import { ApiClient, ApiError } from "./api.js"
import type { AppState } from "./types.js"
import {
  renderBanner,
  renderPublishers,
  renderReceipts,
  renderTopic,
  renderWhitelist,
} from "./views.js"

export type Mounted = {
  state: AppState
  refresh: () => Promise<void>
  submit: (body: { text?: string; verdict?: string; publisher?: string }) => Promise<void>
  removeFromWhitelist: (address: string) => Promise<void>
  addToWhitelist: (address: string) => Promise<void>
  complain: (digest: string) => Promise<void>
  setUrl: (url: string) => void
  stop: () => void
}

export function mount(root: Document, api: ApiClient, pollMs = 3000): Mounted {
  const state: AppState = {
    url: "",
    topic: null,
    receipts: [],
    publishers: [],
    whitelist: [],
    error: null,
    notice: null,
  }

  const el = (id: string) => {
    const node = root.getElementById(id)
    if (!node) throw new Error(`missing #${id} in page`)
    return node
  }

  function render(): void {
    el("banner").innerHTML = renderBanner(state)
    el("topic-view").innerHTML = renderTopic(state.topic, state.whitelist.length === 0)
    el("receipts-view").innerHTML = renderReceipts(state.receipts)
    el("publishers-view").innerHTML = renderPublishers(state.publishers)
    el("whitelist-view").innerHTML = renderWhitelist(state.whitelist)
  }

  async function guard<T>(work: () => Promise<T>): Promise<T | undefined> {
    try {
      const result = await work()
      state.error = null
      return result
    } catch (err) {
      state.error = err instanceof ApiError ? `${err.kind}: ${err.message}` : String(err)
      render()
      return undefined
    }
  }

  async function auditPending(): Promise<void> {
    for (const row of state.receipts) {
      if (row.status === "pending") {
        await api.audit(row.receipt.requestDigest).catch(() => undefined)
      }
    }
  }

  async function refresh(): Promise<void> {
    await guard(async () => {
      state.whitelist = (await api.whitelist()).addresses
      await auditPending().catch(() => undefined)
      state.receipts = await api.receipts()
      state.publishers = await api.publishers()
      if (state.url) {
        state.topic = await api.annotations(state.url)
      }
    })
    render()
  }

  async function submit(body: {
    text?: string
    verdict?: string
    publisher?: string
  }): Promise<void> {
    if (!state.url) {
      state.error = "enter a page URL first"
      render()
      return
    }
    if (!body.verdict && !body.text) {
      state.error = "annotation body is empty"
      render()
      return
    }
    const done = await guard(() => api.annotate(state.url, body))
    if (done) {
      state.notice = "annotation submitted; receipt pending"
      await refresh()
    }
  }

  async function removeFromWhitelist(address: string): Promise<void> {
    const next = state.whitelist.filter((a) => a !== address)
    const done = await guard(() => api.setWhitelist(next))
    if (done) await refresh()
  }

  async function addToWhitelist(address: string): Promise<void> {
    if (!/^0x[0-9a-f]{40}$/.test(address)) {
      state.error = `not a valid creator address: ${address}`
      render()
      return
    }
    const done = await guard(() => api.setWhitelist([...state.whitelist, address]))
    if (done) await refresh()
  }

  async function complain(digest: string): Promise<void> {
    const done = await guard(() => api.complain(digest))
    if (done) {
      state.notice = `complaint filed against ${done.publisher}`
      await refresh()
    }
  }

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement | null
    if (!target) return
    if (target.id === "retry") void refresh()
    if (target.classList.contains("complain") && !target.hasAttribute("disabled")) {
      void complain(target.getAttribute("data-digest") ?? "")
    }
    if (target.classList.contains("wl-remove")) {
      void removeFromWhitelist(target.getAttribute("data-address") ?? "")
    }
  })

  const timer = setInterval(() => void refresh(), pollMs)

  return {
    state,
    refresh,
    submit,
    removeFromWhitelist,
    addToWhitelist,
    complain,
    setUrl: (url: string) => {
      state.url = url
    },
    stop: () => clearInterval(timer),
  }
}
