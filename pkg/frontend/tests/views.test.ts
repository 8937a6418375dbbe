// Renderers are pure functions of API responses; these tests pin their
// output for fixed fixtures.

import { describe, expect, it } from "vitest"

import {
  badgeFor,
  escapeHtml,
  renderPublishers,
  renderReceipts,
  renderTopic,
  renderWhitelist,
} from "../src/views.js"
import type { ReceiptRow, TopicResponse } from "../src/types.js"

const TOPIC: TopicResponse = {
  url: "https://news.example/a",
  topic: "ab".repeat(32),
  counts: { accepted: 2, filtered: 1 },
  claims: [
    {
      verdict: "accepted",
      record: { link: "b16-22-32-" + "00".repeat(32), issuer: "0x" + "11".repeat(20), timestamp: 45 },
      claim: {
        id: "urn:claim:x",
        type: ["VerifiableClaim", "AnnotationClaim"],
        issuer: "0x" + "11".repeat(20),
        issuanceDate: "2018-01-28T00:00:00Z",
        creator: "0x" + "11".repeat(20),
        topic: "ab".repeat(32),
        claim: { type: "Annotation", body: { type: "Classification", value: "false" } },
      },
    },
    {
      verdict: "accepted",
      record: { link: "b16-22-32-" + "01".repeat(32), issuer: "0x" + "22".repeat(20), timestamp: 46 },
      claim: {
        id: "urn:claim:y",
        type: ["VerifiableClaim", "AnnotationClaim"],
        issuer: "0x" + "22".repeat(20),
        issuanceDate: "2018-01-28T00:00:01Z",
        creator: "0x" + "22".repeat(20),
        topic: "ab".repeat(32),
        claim: { type: "Annotation", body: { type: "TextualBody", value: "a <b>bold</b> lie" } },
      },
    },
  ],
}

describe("renderTopic", () => {
  it("mirrors the response order and counts", () => {
    const html = renderTopic(TOPIC, false)
    expect(html).toContain("accepted: 2, filtered: 1")
    const first = html.indexOf("verdict: false")
    const second = html.indexOf("a &lt;b&gt;bold&lt;/b&gt; lie")
    expect(first).toBeGreaterThan(-1)
    expect(second).toBeGreaterThan(first) // same order as the API response
  })

  it("labels each claim with its kind", () => {
    const html = renderTopic(TOPIC, false)
    expect(html).toContain("[classification]")
    expect(html).toContain("[comment]")
  })

  it("escapes claim bodies", () => {
    const html = renderTopic(TOPIC, false)
    expect(html).not.toContain("<b>bold</b>")
  })

  it("explains an empty whitelist", () => {
    const empty = { ...TOPIC, claims: [], counts: { filtered: 2 } }
    expect(renderTopic(empty, true)).toContain("Whitelist is empty")
    expect(renderTopic(empty, false)).toContain("No claims")
    expect(renderTopic(null, false)).toContain("Enter a page URL")
  })
})

describe("renderReceipts", () => {
  const base: ReceiptRow = {
    receipt: {
      type: "IssuanceReceipt",
      requestDigest: "cd".repeat(32),
      topic: "ab".repeat(32),
      publisher: "0x" + "33".repeat(20),
      deadline: 120,
      signature: "ee".repeat(64),
    },
    status: "pending",
    claim_uid: "cd".repeat(32),
    target_url: "https://news.example/a",
    complaint_link: null,
  }

  it("badge comes from the audit status field alone", () => {
    expect(badgeFor("pending")).toContain("badge-pending")
    expect(badgeFor("ok")).toContain("badge-ok")
    expect(badgeFor("request_drop")).toContain("badge-fault")
  })

  it("disables complaining about kept promises", () => {
    const ok = renderReceipts([{ ...base, status: "ok" }])
    expect(ok).toContain("disabled")
    const faulty = renderReceipts([{ ...base, status: "request_drop" }])
    expect(faulty).toContain('data-digest="' + "cd".repeat(32) + '"')
    expect(faulty).not.toContain("disabled")
  })

  it("marks receipts that already carry a complaint", () => {
    const done = renderReceipts([
      { ...base, status: "request_drop", complaint_link: "b16-22-32-" + "02".repeat(32) },
    ])
    expect(done).toContain("complaint filed")
    expect(done).toContain("disabled")
  })
})

describe("renderPublishers", () => {
  it("shows complaint counts and warning badges", () => {
    const html = renderPublishers([
      { address: "0x" + "44".repeat(20), endpoint: "honest.demo", status: "active", complaints: 0 },
      { address: "0x" + "55".repeat(20), endpoint: "flaky.demo", status: "active", complaints: 3 },
    ])
    expect(html).toContain("honest.demo")
    expect(html).toContain('complaint-count">3<')
    expect(html.match(/badge-fault/g)?.length).toBe(1)
  })
})

describe("renderWhitelist", () => {
  it("lists removable entries and notes emptiness", () => {
    const address = "0x" + "66".repeat(20)
    expect(renderWhitelist([address])).toContain(`data-address="${address}"`)
    expect(renderWhitelist([])).toContain("empty")
  })
})

describe("escapeHtml", () => {
  it("neutralizes markup", () => {
    expect(escapeHtml(`<img src=x onerror="pwn()">`)).toBe(
      "&lt;img src=x onerror=&quot;pwn()&quot;&gt;",
    )
  })
})
