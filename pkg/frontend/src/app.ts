// Imperative browser shell: owns the current view, calls the API, and swaps
// rendered HTML into #app. Every value shown is server-authoritative; payment
// and mining actions repaint only after the server has answered.

import { RevsysApi, type ReceiptBody, type SlipBody } from "./api.js";
import { screenMessage, type ScreenMessage } from "./messages.js";
import {
  clearSession,
  getSession,
  routeAfterLogin,
  setSession,
} from "./session.js";
import {
  bankViewForLookup,
  bankViewForPayment,
  renderAdminHome,
  renderBankDesk,
  renderBanner,
  renderBirConsole,
  renderChangePassword,
  renderLogin,
  renderReceipt,
  renderReceiptLookup,
  renderShell,
  renderSlip,
  renderTaxpayerHome,
  tinSentNotice,
  type AdminState,
  type BankView,
  type BirState,
  type LoginTab,
  type ReceiptLookupState,
  type TaxpayerState,
} from "./render.js";

const NETWORK_DOWN: ScreenMessage = {
  text: "Cannot reach the service. Check your connection and try again.",
  severity: "error",
};

type View =
  | { screen: "login"; tab: LoginTab; error?: ScreenMessage }
  | { screen: "change-password"; notice?: ScreenMessage }
  | { screen: "admin-home"; state: AdminState }
  | { screen: "bir-console"; state: BirState }
  | { screen: "taxpayer-home"; state: TaxpayerState; reprint: ReceiptLookupState }
  | { screen: "slip"; slip: SlipBody }
  | { screen: "receipt"; receipt: ReceiptBody }
  | { screen: "bank-desk"; view: BankView };

const api = new RevsysApi("");
let view: View = { screen: "login", tab: "taxpayer" };

// One-shot banner above the current screen: Welcome! after login, the
// password-change confirmation, or the network failure notice.
let flash: ScreenMessage | null = null;

function paint(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const session = getSession();
  const chrome = session
    ? { role: session.role, displayName: session.displayName }
    : null;
  root.innerHTML = renderShell(
    chrome,
    (flash ? renderBanner(flash) : "") + renderBody(),
  );
}

function renderBody(): string {
  switch (view.screen) {
    case "login":
      return renderLogin(view.tab, view.error);
    case "change-password":
      return renderChangePassword(view.notice);
    case "admin-home":
      return renderAdminHome(view.state);
    case "bir-console":
      return renderBirConsole(view.state);
    case "taxpayer-home":
      return renderTaxpayerHome(view.state) + renderReceiptLookup(view.reprint);
    case "slip":
      return renderSlip(view.slip);
    case "receipt":
      return renderReceipt(view.receipt);
    case "bank-desk":
      return renderBankDesk(view.view);
  }
}

async function guarded(action: () => Promise<void>): Promise<void> {
  flash = null;
  try {
    await action();
  } catch {
    flash = NETWORK_DOWN;
  }
  paint();
}

function fields(form: HTMLFormElement): Record<string, string> {
  const out: Record<string, string> = {};
  new FormData(form).forEach((value, key) => {
    out[key] = String(value);
  });
  return out;
}

// -- screen loaders -----------------------------------------------------------

async function goHome(): Promise<void> {
  const session = getSession();
  if (!session) {
    view = { screen: "login", tab: "taxpayer" };
    return;
  }
  switch (session.role) {
    case "Admin":
      view = { screen: "admin-home", state: {} };
      return;
    case "BirStaff":
      view = { screen: "bir-console", state: {} };
      return;
    case "BankStaff":
      view = { screen: "bank-desk", view: { kind: "idle" } };
      return;
    case "Taxpayer":
      view = { screen: "taxpayer-home", state: await loadAssessment(), reprint: {} };
  }
}

async function loadAssessment(): Promise<TaxpayerState> {
  const session = getSession();
  if (!session) return { noAssessment: true };
  const res = await api.viewAssessment(session.token);
  if (res.status === 200) return { assessment: res.body };
  return { noAssessment: true };
}

// -- form submissions ----------------------------------------------------------

async function submitLogin(kind: LoginTab, form: HTMLFormElement): Promise<void> {
  const data = fields(form);
  const res = kind === "taxpayer"
    ? await api.taxpayerLogin(data.tin ?? "", data.password ?? "")
    : await api.staffLogin(data.username ?? "", data.password ?? "");
  const route = routeAfterLogin(res.status, res.body);
  if (route.kind === "rejected") {
    view = { screen: "login", tab: kind, error: route.message };
    return;
  }
  setSession(route.session);
  flash = screenMessage(res.body.display_message ?? "");
  if (route.kind === "force-password-change") {
    view = { screen: "change-password" };
    return;
  }
  await goHome();
}

async function submitPasswordChange(form: HTMLFormElement): Promise<void> {
  const session = getSession();
  if (!session) return;
  const data = fields(form);
  const res = await api.changePassword(
    session.token, data.old ?? "", data.new ?? "", data.confirm ?? "");
  if (res.status !== 200) {
    view = {
      screen: "change-password",
      notice: screenMessage(res.body.display_message ?? res.body.error),
    };
    return;
  }
  flash = screenMessage(res.body.display_message);
  await goHome();
}

async function submitCreateStaff(form: HTMLFormElement): Promise<void> {
  const session = getSession();
  if (!session) return;
  const data = fields(form);
  const res = await api.createStaff(
    session.token, data.username ?? "", data.password ?? "", data.role ?? "");
  const staffNotice: ScreenMessage = res.status === 200
    ? { text: `Staff account ${data.username} created.`, severity: "success" }
    : { text: res.body.detail ?? res.body.error, severity: "error" };
  view = { screen: "admin-home", state: { staffNotice } };
}

async function submitIssueTin(form: HTMLFormElement): Promise<void> {
  const session = getSession();
  if (!session) return;
  const data = fields(form);
  const res = await api.issueTin(session.token, data.taxpayer_id ?? "");
  const tinNotice: ScreenMessage = res.status === 200
    ? tinSentNotice(res.body.taxpayer_id)
    : { text: res.body.detail ?? res.body.error, severity: "error" };
  view = { screen: "admin-home", state: { tinNotice } };
}

async function submitCapture(form: HTMLFormElement): Promise<void> {
  const session = getSession();
  if (!session) return;
  const data = fields(form);
  const res = await api.registerTaxpayer(session.token, {
    full_name: data.full_name ?? "",
    email: data.email ?? "",
    phone: data.phone ?? "",
    business_name: data.business_name ?? "",
    location: data.location ?? "",
    sector: data.sector ?? "",
    financials: [{
      period: data.period ?? "",
      revenue_kobo: Number(data.revenue_kobo ?? 0),
      expenses_kobo: Number(data.expenses_kobo ?? 0),
    }],
  });
  const state: BirState = res.status === 200
    ? { uploadSummary: `Stored ${res.body.taxpayer_id} (${res.body.business_id}).` }
    : { message: { text: res.body.detail ?? res.body.error, severity: "error" } };
  view = { screen: "bir-console", state };
}

async function submitCsvUpload(form: HTMLFormElement): Promise<void> {
  const session = getSession();
  if (!session) return;
  const data = fields(form);
  const res = await api.uploadCaptureCsv(session.token, data.csv ?? "");
  const state: BirState = res.status === 200
    ? {
        uploadSummary:
          `Stored ${res.body.stored_count} rows, rejected ${res.body.rejected_count}.`,
      }
    : { message: { text: res.body.detail ?? res.body.error, severity: "error" } };
  view = { screen: "bir-console", state };
}

async function submitLookup(form: HTMLFormElement): Promise<void> {
  const session = getSession();
  if (!session) return;
  const data = fields(form);
  const code = data.code ?? "";
  const presenter = data.presenter_tin ?? "";
  const res = await api.bankLookup(session.token, code, presenter || undefined);
  view = { screen: "bank-desk", view: bankViewForLookup(code, presenter, res.body) };
}

async function submitReprint(form: HTMLFormElement): Promise<void> {
  const session = getSession();
  if (!session) return;
  const data = fields(form);
  const res = await api.reprintReceipt(session.token, data.code ?? "");
  if (res.status === 200) {
    view = { screen: "receipt", receipt: res.body };
    return;
  }
  view = {
    screen: "taxpayer-home",
    state: await loadAssessment(),
    reprint: {
      notice: {
        text: "No paid receipt is on record for that code.",
        severity: "error",
      },
    },
  };
}

// -- button actions ------------------------------------------------------------

async function runMine(): Promise<void> {
  const session = getSession();
  if (!session) return;
  const res = await api.mine(session.token);
  const state: BirState = res.status === 200
    ? {
        message: screenMessage(res.body.display_message),
        tierCounts: res.body.tier_counts,
      }
    : { message: screenMessage(res.body.display_message ?? res.body.error) };
  view = { screen: "bir-console", state };
}

async function fetchReferenceCode(): Promise<void> {
  const session = getSession();
  if (!session) return;
  const res = await api.requestReferenceCode(session.token);
  if (res.status === 200) {
    view = { screen: "slip", slip: res.body };
    return;
  }
  view = {
    screen: "taxpayer-home",
    state: {
      ...(await loadAssessment()),
      message: screenMessage(res.body.display_message ?? res.body.error),
    },
    reprint: {},
  };
}

async function recordPaid(button: HTMLElement): Promise<void> {
  const session = getSession();
  if (!session) return;
  const res = await api.recordPayment(
    session.token,
    button.dataset.code ?? "",
    button.dataset.tin ?? "",
    Number(button.dataset.kobo ?? 0),
  );
  view = { screen: "bank-desk", view: bankViewForPayment(res.status, res.body) };
}

async function doLogout(): Promise<void> {
  const session = getSession();
  if (session) await api.logout(session.token);
  clearSession();
  view = { screen: "login", tab: "taxpayer" };
}

// -- wiring --------------------------------------------------------------------

function onSubmit(event: Event): void {
  const form = event.target;
  if (!(form instanceof HTMLFormElement)) return;
  event.preventDefault();
  const name = form.dataset.form ?? "";
  const handlers: Record<string, () => Promise<void>> = {
    "taxpayer-login": () => submitLogin("taxpayer", form),
    "staff-login": () => submitLogin("staff", form),
    "change-password": () => submitPasswordChange(form),
    "create-staff": () => submitCreateStaff(form),
    "issue-tin": () => submitIssueTin(form),
    "capture": () => submitCapture(form),
    "upload-csv": () => submitCsvUpload(form),
    "lookup": () => submitLookup(form),
    "reprint": () => submitReprint(form),
  };
  const handler = handlers[name];
  if (handler) void guarded(handler);
}

function onClick(event: Event): void {
  const target = event.target;
  if (!(target instanceof HTMLElement)) return;
  const button = target.closest<HTMLElement>("[data-action]");
  if (!button || button.closest("form")) return;
  switch (button.dataset.action) {
    case "show-login-tab":
      view = { screen: "login", tab: (button.dataset.tab as LoginTab) ?? "taxpayer" };
      paint();
      return;
    case "logout":
      void guarded(doLogout);
      return;
    case "mine":
      void guarded(runMine);
      return;
    case "get-reference-code":
      void guarded(fetchReferenceCode);
      return;
    case "pay":
      void guarded(() => recordPaid(button));
      return;
    case "print":
      window.print();
      return;
    case "back-home":
      void guarded(goHome);
      return;
  }
}

export function start(): void {
  document.addEventListener("submit", onSubmit);
  document.addEventListener("click", onClick);
  paint();
}

start();
