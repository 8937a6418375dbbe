// Shapes of the client service's JSON responses. The UI state is nothing
// but these objects; every render is a pure function of them.

export type ClaimDocument = {
  id: string | null
  type: string[]
  issuer: string
  issuanceDate: string
  creator: string
  topic: string | null
  claim: {
    type: string
    target?: string
    body?: { type: string; value: string; purpose?: string }
    [key: string]: unknown
  }
  proof?: { type: string; verificationMethod: string; proofValue: string }
}

export type RecordInfo = {
  link: string
  issuer: string
  timestamp: number
}

export type VerifiedClaimRow = {
  verdict: string
  claim: ClaimDocument | null
  record: RecordInfo
}

export type TopicResponse = {
  url: string
  topic: string
  claims: VerifiedClaimRow[]
  counts: Record<string, number>
}

export type ReceiptDocument = {
  type: string
  requestDigest: string
  topic: string
  publisher: string
  deadline: number
  signature?: string
}

export type ReceiptRow = {
  receipt: ReceiptDocument
  status: string // pending | ok | request_drop | request_corruption | replica_drop
  claim_uid: string
  target_url: string
  complaint_link: string | null
}

export type PublisherRow = {
  address: string
  endpoint: string
  status: string
  complaints: number
}

export type AuditResponse = {
  result: string
  deadline?: number
  now?: number
}

export type ComplaintResponse = {
  complaint: ClaimDocument
  publisher: string
  publisher_complaints: number
  confirmed_at: number
}

export type AppState = {
  url: string
  topic: TopicResponse | null
  receipts: ReceiptRow[]
  publishers: PublisherRow[]
  whitelist: string[]
  error: string | null
  notice: string | null
}

export const FAULT_STATUSES = ["request_drop", "request_corruption", "replica_drop"]

export function isFault(status: string): boolean {
  return FAULT_STATUSES.indexOf(status) >= 0
}
