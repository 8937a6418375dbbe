// Thin client for the local annotation service. No cryptography and no key
// material ever lives in the browser: every state change round-trips
// through this API.

import type {
  AuditResponse,
  ComplaintResponse,
  PublisherRow,
  ReceiptRow,
  TopicResponse,
} from "./types.js"

export class ApiError extends Error {
  status: number
  kind: string

  constructor(status: number, kind: string, detail: string) {
    super(detail)
    this.status = status
    this.kind = kind
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>

export class ApiClient {
  baseUrl: string
  private fetchFn: FetchLike

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "")
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init))
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    })
    const text = await response.text()
    const payload = text ? JSON.parse(text) : null
    if (!response.ok) {
      const kind = payload?.error ?? "HttpError"
      throw new ApiError(response.status, kind, payload?.detail ?? response.statusText)
    }
    return payload as T
  }

  health(): Promise<{ status: string; address: string; now: number }> {
    return this.request("GET", "/health")
  }

  annotations(url: string, all = false): Promise<TopicResponse> {
    const q = `?url=${encodeURIComponent(url)}${all ? "&all=true" : ""}`
    return this.request("GET", `/annotations${q}`)
  }

  annotate(url: string, body: { text?: string; verdict?: string; publisher?: string }) {
    return this.request<{ claim: unknown; receipt?: unknown }>("POST", "/annotations", {
      url,
      ...body,
    })
  }

  receipts(): Promise<ReceiptRow[]> {
    return this.request("GET", "/receipts")
  }

  audit(requestDigest: string): Promise<AuditResponse> {
    return this.request("POST", "/audits", { request_digest: requestDigest })
  }

  complain(requestDigest: string): Promise<ComplaintResponse> {
    return this.request("POST", "/complaints", { request_digest: requestDigest })
  }

  whitelist(): Promise<{ addresses: string[] }> {
    return this.request("GET", "/whitelist")
  }

  setWhitelist(addresses: string[]): Promise<{ addresses: string[] }> {
    return this.request("PUT", "/whitelist", { addresses })
  }

  publishers(): Promise<PublisherRow[]> {
    return this.request("GET", "/publishers")
  }

  advance(seconds: number): Promise<{ now: number }> {
    return this.request("POST", "/sim/advance", { seconds })
  }
}
