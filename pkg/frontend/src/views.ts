// Pure renderers: API responses in, HTML strings out. Nothing here touches
// the network or the DOM, which is what makes the snapshot tests honest.

import type { AppState, PublisherRow, ReceiptRow, TopicResponse, VerifiedClaimRow } from "./types.js"
import { isFault } from "./types.js"

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
}

function shortAddress(address: string): string {
  return address.length > 12 ? `${address.slice(0, 8)}…${address.slice(-4)}` : address
}

function claimBody(row: VerifiedClaimRow): string {
  const body = row.claim?.claim?.body
  if (!body) return "(bytes unavailable)"
  return body.type === "Classification" ? `verdict: ${body.value}` : body.value
}

function claimKind(row: VerifiedClaimRow): string {
  const body = row.claim?.claim?.body
  if (!body) return "unknown"
  return body.type === "Classification" ? "classification" : "comment"
}

export function renderTopic(view: TopicResponse | null, whitelistEmpty: boolean): string {
  if (view === null) {
    return `<p class="muted">Enter a page URL and press Watch.</p>`
  }
  const counts = Object.keys(view.counts)
    .sort()
    .map((verdict) => `${verdict}: ${view.counts[verdict]}`)
    .join(", ")
  const items = view.claims
    .map(
      (row) => `<li class="claim verdict-${row.verdict}">
  <span class="creator">${escapeHtml(shortAddress(row.claim?.creator ?? row.record.issuer))}</span>
  <span class="kind">[${claimKind(row)}]</span>
  <span class="body">${escapeHtml(claimBody(row))}</span>
  <span class="ts">t=${row.record.timestamp}</span>
</li>`,
    )
    .join("\n")
  const emptyNote = view.claims.length
    ? ""
    : whitelistEmpty
      ? `<p class="muted">Whitelist is empty: every creator is filtered out.</p>`
      : `<p class="muted">No claims for this page yet.</p>`
  return `<h3>topic <code>${view.topic.slice(0, 16)}…</code></h3>
<p class="counts">${counts || "no records"}</p>
<ol class="claims">${items}</ol>
${emptyNote}`
}

export function badgeFor(status: string): string {
  const cls = status === "ok" ? "ok" : status === "pending" ? "pending" : "fault"
  return `<span class="badge badge-${cls}">${status}</span>`
}

export function renderReceipts(rows: ReceiptRow[]): string {
  if (!rows.length) return `<p class="muted">No receipts yet.</p>`
  const items = rows
    .map((row) => {
      const complainable = isFault(row.status) && !row.complaint_link
      const button = `<button class="complain" data-digest="${row.receipt.requestDigest}"${
        complainable ? "" : " disabled"
      }>complain</button>`
      const complained = row.complaint_link ? `<span class="complained">complaint filed</span>` : ""
      return `<li class="receipt">
  <code>${row.receipt.requestDigest.slice(0, 12)}…</code>
  from ${escapeHtml(shortAddress(row.receipt.publisher))}
  topic <code>${row.receipt.topic.slice(0, 12)}…</code>
  deadline t=${row.receipt.deadline}
  ${badgeFor(row.status)} ${button} ${complained}
</li>`
    })
    .join("\n")
  return `<ul class="receipts">${items}</ul>`
}

export function renderPublishers(rows: PublisherRow[]): string {
  if (!rows.length) return `<p class="muted">No publishers registered.</p>`
  const items = rows
    .map(
      (row) => `<li class="publisher${row.complaints > 0 ? " warned" : ""}">
  ${escapeHtml(row.endpoint)} (${escapeHtml(shortAddress(row.address))})
  complaints: <span class="complaint-count">${row.complaints}</span>${
    row.complaints > 0 ? ` <span class="badge badge-fault">warning</span>` : ""
  }
</li>`,
    )
    .join("\n")
  return `<ul class="publishers">${items}</ul>`
}

export function renderWhitelist(addresses: string[]): string {
  if (!addresses.length) {
    return `<p class="muted">Whitelist is empty.</p>`
  }
  const items = addresses
    .map(
      (address) => `<li><code>${escapeHtml(address)}</code>
  <button class="wl-remove" data-address="${escapeHtml(address)}">remove</button></li>`,
    )
    .join("\n")
  return `<ul class="whitelist">${items}</ul>`
}

export function renderBanner(state: AppState): string {
  if (state.error) {
    return `<div class="banner error">${escapeHtml(state.error)}
  <button id="retry">retry</button></div>`
  }
  if (state.notice) {
    return `<div class="banner notice">${escapeHtml(state.notice)}</div>`
  }
  return ""
}
