// The fixed table of user-visible screen messages. Every string shown on a
// screen is drawn verbatim from here and must match the service byte-for-byte,
// so never edit in place: the exact text is part of the wire contract.

export const WELCOME = "Welcome!";
export const INVALID_TIN_LOGIN = "Invalid TIN or password...try again";
export const INVALID_STAFF_LOGIN = "Invalid username or password...try again";
export const AMOUNT_BLOCKED = "Amount cannot be altered by taxpayers.";
export const EXTRACTION_OK = "Extraction successful!";
export const NO_EARNINGS =
  "Tax payers cannot be clustered into tiers.." +
  "No records found on earnings or profit margin";
export const PASSWORD_CHANGED = "Password change successful!";
export const TRANSACTION_OK = "Transaction ... successful!";
export const FRAUD_ALERT = "Fraud Attempt Alert!!!";

export const MESSAGE_TABLE: Record<string, string> = {
  welcome: WELCOME,
  invalid_tin_login: INVALID_TIN_LOGIN,
  invalid_staff_login: INVALID_STAFF_LOGIN,
  amount_blocked: AMOUNT_BLOCKED,
  extraction_ok: EXTRACTION_OK,
  no_earnings: NO_EARNINGS,
  password_changed: PASSWORD_CHANGED,
  transaction_ok: TRANSACTION_OK,
  fraud_alert: FRAUD_ALERT,
};

export type Severity = "info" | "success" | "error" | "alert";

export interface ScreenMessage {
  text: string;
  severity: Severity;
}

const SEVERITY_BY_TEXT: Record<string, Severity> = {
  [WELCOME]: "success",
  [INVALID_TIN_LOGIN]: "error",
  [INVALID_STAFF_LOGIN]: "error",
  [AMOUNT_BLOCKED]: "error",
  [EXTRACTION_OK]: "success",
  [NO_EARNINGS]: "error",
  [PASSWORD_CHANGED]: "success",
  [TRANSACTION_OK]: "success",
  [FRAUD_ALERT]: "alert",
};

/** Severity for a message text; fraud alerts are always "alert". */
export function classify(text: string): Severity {
  if (text === FRAUD_ALERT) return "alert";
  return SEVERITY_BY_TEXT[text] ?? "info";
}

/** Wraps a server-supplied text in a ScreenMessage with its fixed severity. */
export function screenMessage(text: string): ScreenMessage {
  return { text, severity: classify(text) };
}
