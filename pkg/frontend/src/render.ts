// Pure screen renderers. Every function maps server-supplied data to an HTML
// string; no fetching, no DOM access, no client-side state. Amounts, tiers,
// and reference codes are rendered exactly as the API returned them.

import type {
  AssessmentBody,
  LookupBody,
  ReceiptBody,
  SlipBody,
} from "./api.js";
import { FRAUD_ALERT, screenMessage, type ScreenMessage } from "./messages.js";
import type { Role } from "./session.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderBanner(message: ScreenMessage): string {
  return `<div class="banner banner-${message.severity}" role="status">` +
    `${escapeHtml(message.text)}</div>`;
}

const ROLE_TITLES: Record<Role, string> = {
  Admin: "Administration",
  BirStaff: "BIR Console",
  BankStaff: "Bank Desk",
  Taxpayer: "Taxpayer Portal",
};

/** Page chrome. Takes only the display fields of a session; the bearer token
 *  is never passed in, so it cannot appear in the page. */
export function renderShell(
  session: { role: Role; displayName: string } | null,
  content: string,
): string {
  const who = session
    ? `<span class="who">${escapeHtml(session.displayName)}</span>` +
      `<span class="role-tag">${escapeHtml(ROLE_TITLES[session.role])}</span>` +
      `<button type="button" data-action="logout">Log out</button>`
    : "";
  return `
<header class="top-bar">
  <h1>State Revenue Collection</h1>
  <nav>${who}</nav>
</header>
<main>${content}</main>`;
}

// -- login ------------------------------------------------------------------

export type LoginTab = "taxpayer" | "staff";

export function renderLogin(tab: LoginTab, error?: ScreenMessage): string {
  const notice = error ? renderBanner(error) : "";
  const taxpayerForm = `
<form data-form="taxpayer-login">
  <label>TIN <input name="tin" autocomplete="username" placeholder="ED-00000000-0"></label>
  <label>Password <input name="password" type="password" autocomplete="current-password"></label>
  <button type="submit" data-action="taxpayer-login">Log on</button>
</form>`;
  const staffForm = `
<form data-form="staff-login">
  <label>Username <input name="username" autocomplete="username"></label>
  <label>Password <input name="password" type="password" autocomplete="current-password"></label>
  <button type="submit" data-action="staff-login">Log on</button>
</form>`;
  return `
<section class="login card">
  <div class="tabs">
    <button type="button" data-action="show-login-tab" data-tab="taxpayer"
      class="${tab === "taxpayer" ? "active" : ""}">Taxpayer</button>
    <button type="button" data-action="show-login-tab" data-tab="staff"
      class="${tab === "staff" ? "active" : ""}">Staff</button>
  </div>
  ${notice}
  ${tab === "taxpayer" ? taxpayerForm : staffForm}
</section>`;
}

export function renderChangePassword(notice?: ScreenMessage): string {
  return `
<section class="card">
  <h2>Change your password</h2>
  <p>Your account uses a default password. Choose a new one to continue.</p>
  ${notice ? renderBanner(notice) : ""}
  <form data-form="change-password">
    <label>Current password <input name="old" type="password"></label>
    <label>New password <input name="new" type="password"></label>
    <label>Confirm new password <input name="confirm" type="password"></label>
    <button type="submit" data-action="change-password">Change password</button>
  </form>
</section>`;
}

// -- admin ---------------------------------------------------------------------

export interface AdminState {
  staffNotice?: ScreenMessage;
  tinNotice?: ScreenMessage;
}

export function renderAdminHome(state: AdminState): string {
  return `
<section class="card">
  <h2>Create staff account</h2>
  ${state.staffNotice ? renderBanner(state.staffNotice) : ""}
  <form data-form="create-staff">
    <label>Username <input name="username"></label>
    <label>Password <input name="password" type="password"></label>
    <label>Role
      <select name="role">
        <option value="BirStaff">BIR staff</option>
        <option value="BankStaff">Bank staff</option>
      </select>
    </label>
    <button type="submit" data-action="create-staff">Create</button>
  </form>
</section>
<section class="card">
  <h2>Issue TIN</h2>
  ${state.tinNotice ? renderBanner(state.tinNotice) : ""}
  <form data-form="issue-tin">
    <label>Taxpayer id <input name="taxpayer_id" placeholder="TP000001"></label>
    <button type="submit" data-action="issue-tin">Issue and send</button>
  </form>
</section>`;
}

/** Issuance confirmation. Deliberately shows only that the TIN was sent; the
 *  TIN itself travels to the taxpayer's contact on record, not to this page. */
export function tinSentNotice(taxpayerId: string): ScreenMessage {
  return {
    text: `TIN sent to the contact on record for ${taxpayerId}.`,
    severity: "success",
  };
}

// -- BIR console ------------------------------------------------------------

export const TIER_ORDER = ["Exempt", "T1", "T2", "T3", "T4", "T5"];

export interface BirState {
  message?: ScreenMessage;
  tierCounts?: Record<string, number>;
  uploadSummary?: string;
}

export function renderBirConsole(state: BirState): string {
  return `
<section class="card">
  <h2>Capture taxpayer</h2>
  <form data-form="capture">
    <label>Full name <input name="full_name"></label>
    <label>Email <input name="email" type="email"></label>
    <label>Phone <input name="phone"></label>
    <label>Business name <input name="business_name"></label>
    <label>Location <input name="location"></label>
    <label>Sector <input name="sector"></label>
    <label>Period <input name="period" placeholder="2026-01"></label>
    <label>Revenue (kobo) <input name="revenue_kobo" inputmode="numeric"></label>
    <label>Expenses (kobo) <input name="expenses_kobo" inputmode="numeric"></label>
    <button type="submit" data-action="capture">Store record</button>
  </form>
</section>
<section class="card">
  <h2>Upload capture CSV</h2>
  <form data-form="upload-csv">
    <textarea name="csv" rows="6" placeholder="full_name,email,phone,..."></textarea>
    <button type="submit" data-action="upload-csv">Upload</button>
  </form>
  ${state.uploadSummary ? `<p class="summary">${escapeHtml(state.uploadSummary)}</p>` : ""}
</section>
<section class="card">
  <h2>Mining</h2>
  <button type="button" data-action="mine">Run extraction</button>
  ${state.message ? renderBanner(state.message) : ""}
  ${state.tierCounts ? renderTierDashboard(state.tierCounts) : ""}
</section>`;
}

export function renderTierDashboard(tierCounts: Record<string, number>): string {
  const rows = TIER_ORDER
    .map((label) => `<tr><td>${escapeHtml(label)}</td>` +
      `<td class="count" data-tier="${escapeHtml(label)}">` +
      `${escapeHtml(tierCounts[label] ?? 0)}</td></tr>`)
    .join("");
  return `
<table class="tier-dashboard">
  <thead><tr><th>Tier</th><th>Businesses</th></tr></thead>
  <tbody>${rows}</tbody>
</table>`;
}

// -- taxpayer -----------------------------------------------------------------

export interface TaxpayerState {
  assessment?: AssessmentBody;
  noAssessment?: boolean;
  message?: ScreenMessage;
}

/** Assessment pane. The tax amount is plain text on purpose: no input
 *  control for it exists anywhere in the portal. */
export function renderTaxpayerHome(state: TaxpayerState): string {
  if (state.noAssessment) {
    return `
<section class="card">
  <h2>Your assessment</h2>
  ${state.message ? renderBanner(state.message) : ""}
  <p>No assessment is on record for you yet. Check back after the next mining run.</p>
</section>`;
  }
  const a = state.assessment;
  if (!a) return `<section class="card"><p>Loading your assessment...</p></section>`;
  const rows = a.businesses
    .map((b) => `<tr><td>${escapeHtml(b.business_name)}</td>` +
      `<td>${escapeHtml(b.tier)}</td><td>${escapeHtml(b.period)}</td>` +
      `<td class="amount">${escapeHtml(b.tax_amount)}</td></tr>`)
    .join("");
  return `
<section class="card">
  <h2>Your assessment</h2>
  ${state.message ? renderBanner(state.message) : ""}
  <p>${escapeHtml(a.taxpayer_name)} &middot; ${escapeHtml(a.tin)}</p>
  <table class="assessment">
    <thead><tr><th>Business</th><th>Tier</th><th>Period</th><th>Assessed tax</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>
  <p class="total">Total due: <span class="amount">${escapeHtml(a.tax_amount)}</span>
    (tier ${escapeHtml(a.tier)})</p>
  <button type="button" data-action="get-reference-code">Get Reference Code</button>
</section>`;
}

export function renderSlip(slip: SlipBody): string {
  const reminder = slip.outstanding
    ? renderBanner({
        text: "This code was already issued and is still unpaid; it is shown again.",
        severity: "info",
      })
    : "";
  return `
<section class="card">
  ${reminder}
  <div class="print-area slip">
    <h2>Payment slip</h2>
    <dl>
      <dt>Reference code</dt><dd class="code">${escapeHtml(slip.reference_code)}</dd>
      <dt>Tax amount</dt><dd class="amount">${escapeHtml(slip.tax_amount)}</dd>
      <dt>Taxpayer name</dt><dd>${escapeHtml(slip.taxpayer_name)}</dd>
      <dt>Business name</dt><dd>${escapeHtml(slip.business_name)}</dd>
      <dt>Date</dt><dd>${escapeHtml(slip.date)}</dd>
    </dl>
    <p class="hint">Present this code at the bank to pay.</p>
  </div>
  <button type="button" data-action="print">Print slip</button>
  <button type="button" data-action="back-home">Back</button>
</section>`;
}

/** Receipt view: renders the reprint payload exactly, field for field. */
export function renderReceipt(receipt: ReceiptBody): string {
  return `
<section class="card">
  <div class="print-area receipt">
    <h2>Payment receipt</h2>
    <dl>
      <dt>Receipt no</dt><dd>${escapeHtml(receipt.receipt_no)}</dd>
      <dt>Business name</dt><dd>${escapeHtml(receipt.business_name)}</dd>
      <dt>Amount paid</dt><dd class="amount">${escapeHtml(receipt.amount_paid)}</dd>
      <dt>Date</dt><dd>${escapeHtml(receipt.date)}</dd>
      <dt>Reference code</dt><dd class="code">${escapeHtml(receipt.reference_code)}</dd>
      <dt>TIN</dt><dd>${escapeHtml(receipt.tin)}</dd>
    </dl>
  </div>
  <button type="button" data-action="print">Print receipt</button>
  <button type="button" data-action="back-home">Back</button>
</section>`;
}

export interface ReceiptLookupState {
  notice?: ScreenMessage;
}

export function renderReceiptLookup(state: ReceiptLookupState): string {
  return `
<section class="card">
  <h2>Reprint a receipt</h2>
  ${state.notice ? renderBanner(state.notice) : ""}
  <form data-form="reprint">
    <label>Reference code <input name="code" placeholder="XXXX-XXXX-XXXX-XXXX"></label>
    <button type="submit" data-action="reprint">Fetch receipt</button>
  </form>
</section>`;
}

// -- bank desk ---------------------------------------------------------------

export type BankView =
  | { kind: "idle" }
  | { kind: "genuine"; code: string; presenterTin: string; card: LookupBody }
  | { kind: "empty" }
  | { kind: "stolen"; ownerName: string }
  | { kind: "fraud"; message: ScreenMessage }
  | { kind: "paid"; message: ScreenMessage; receipt: ReceiptBody };

/** Maps a lookup response onto the four teller screen states. A replayed or
 *  expired code is already a fraud signal at the counter. */
export function bankViewForLookup(
  code: string,
  presenterTin: string,
  body: LookupBody,
): BankView {
  switch (body.outcome) {
    case "Valid":
      return { kind: "genuine", code, presenterTin, card: body };
    case "NotFound":
      return { kind: "empty" };
    case "Stolen":
      return { kind: "stolen", ownerName: body.owner_name ?? "" };
    default:
      return { kind: "fraud", message: screenMessage(FRAUD_ALERT) };
  }
}

export function bankViewForPayment(
  status: number,
  body: { display_message?: string; receipt?: ReceiptBody },
): BankView {
  if (status === 200 && body.receipt) {
    return {
      kind: "paid",
      message: screenMessage(body.display_message ?? ""),
      receipt: body.receipt,
    };
  }
  return { kind: "fraud", message: screenMessage(body.display_message ?? FRAUD_ALERT) };
}

export function renderBankDesk(view: BankView): string {
  const search = `
<section class="card">
  <h2>Reference code lookup</h2>
  <form data-form="lookup">
    <label>Reference code <input name="code" placeholder="XXXX-XXXX-XXXX-XXXX"></label>
    <label>Presenter TIN <input name="presenter_tin" placeholder="ED-00000000-0"></label>
    <button type="submit" data-action="lookup">Search</button>
  </form>
</section>`;
  return search + renderBankResult(view);
}

function renderBankResult(view: BankView): string {
  switch (view.kind) {
    case "idle":
      return "";
    case "genuine": {
      const card = view.card;
      return `
<section class="card result-card">
  <h3>Code verified</h3>
  <dl>
    <dt>Business name</dt><dd>${escapeHtml(card.business_name)}</dd>
    <dt>Taxpayer name</dt><dd>${escapeHtml(card.taxpayer_name)}</dd>
    <dt>Tax amount</dt><dd class="amount">${escapeHtml(card.tax_amount)}</dd>
    <dt>TIN</dt><dd>${escapeHtml(card.tin)}</dd>
  </dl>
  <button type="button" data-action="pay" data-code="${escapeHtml(view.code)}"
    data-tin="${escapeHtml(view.presenterTin)}"
    data-kobo="${escapeHtml(card.tax_kobo)}">Paid</button>
</section>`;
    }
    case "empty":
      return `
<section class="card result-empty">
  <p>No information found for this code.</p>
</section>`;
    case "stolen":
      return `
<section class="card result-stolen">
  <h3>Code belongs to someone else</h3>
  <p>This code was issued to ${escapeHtml(view.ownerName)}. Do not accept payment
  from the presenter.</p>
</section>`;
    case "fraud":
      return renderBanner(view.message);
    case "paid":
      return renderBanner(view.message) + renderReceipt(view.receipt);
  }
}
