// Thin fetch client for the revenue service HTTP API. Every call resolves to
// {status, body} even for error responses; only a network failure rejects, so
// screens can render the server's exact display_message for any outcome.

export interface ApiResult<T> {
  status: number;
  body: T;
}

export interface ErrorBody {
  error: string;
  display_message?: string;
  detail?: string;
  rule_hits?: string[];
}

export interface StaffLoginBody {
  display_message: string;
  token: string;
  role: string;
  display_name: string;
}

export interface TaxpayerLoginBody extends StaffLoginBody {
  tin: string;
  must_change_password: boolean;
}

export interface RegisterBody {
  taxpayer_id: string;
  business_id: string;
}

export interface CaptureUploadBody {
  stored: { row: number; taxpayer_id: string; business_id: string }[];
  rejected: { row: number; reason: string }[];
  stored_count: number;
  rejected_count: number;
}

export interface MineBody {
  display_message: string;
  run_id: string;
  assessed_count: number;
  total_tax_kobo: number;
  tier_counts: Record<string, number>;
}

export interface IssueTinBody {
  taxpayer_id: string;
  tin: string;
}

export interface AssessmentBody {
  taxpayer_name: string;
  tin: string;
  businesses: {
    business_id: string;
    business_name: string;
    tier: string;
    tax_kobo: number;
    tax_amount: string;
    period: string;
  }[];
  tier: string;
  tax_kobo: number;
  tax_amount: string;
  amount_editable: boolean;
}

export interface SlipBody {
  reference_code: string;
  tax_amount: string;
  tax_kobo: number;
  taxpayer_name: string;
  business_name: string;
  date: string;
  outstanding: boolean;
}

export interface ReceiptBody {
  receipt_no: string;
  business_name: string;
  amount_paid: string;
  amount_paid_kobo: number;
  date: string;
  reference_code: string;
  tin: string;
}

export interface LookupBody {
  outcome: string;
  found: boolean;
  owner_name?: string;
  business_name?: string;
  taxpayer_name?: string;
  tax_amount?: string;
  tax_kobo?: number;
  tin?: string;
}

export interface PaymentBody {
  display_message: string;
  txn_id: string;
  receipt: ReceiptBody;
}

export class RevsysApi {
  constructor(readonly baseUrl: string = "") {}

  private async send<T>(
    method: string,
    path: string,
    token?: string,
    payload?: unknown,
    contentType?: string,
  ): Promise<ApiResult<T>> {
    const headers: Record<string, string> = {};
    if (token) headers["Authorization"] = `Bearer ${token}`;
    let body: string | undefined;
    if (payload !== undefined) {
      headers["Content-Type"] = contentType ?? "application/json";
      body = contentType === "text/csv" ? String(payload) : JSON.stringify(payload);
    }
    const res = await fetch(this.baseUrl + path, { method, headers, body });
    return { status: res.status, body: (await res.json()) as T };
  }

  health() {
    return this.send<{ status: string; seq: number }>("GET", "/health");
  }

  staffLogin(username: string, password: string) {
    return this.send<StaffLoginBody & ErrorBody>(
      "POST", "/api/auth/staff-login", undefined, { username, password });
  }

  taxpayerLogin(tin: string, password: string) {
    return this.send<TaxpayerLoginBody & ErrorBody>(
      "POST", "/api/auth/taxpayer-login", undefined, { tin, password });
  }

  logout(token: string) {
    return this.send<{ status: string }>("POST", "/api/auth/logout", token, {});
  }

  createStaff(token: string, username: string, password: string, role: string) {
    return this.send<{ username: string; role: string } & ErrorBody>(
      "POST", "/api/admin/staff", token, { username, password, role });
  }

  registerTaxpayer(token: string, payload: Record<string, unknown>) {
    return this.send<RegisterBody & ErrorBody>(
      "POST", "/api/bir/taxpayers", token, payload);
  }

  uploadCaptureCsv(token: string, csvText: string) {
    return this.send<CaptureUploadBody & ErrorBody>(
      "POST", "/api/bir/taxpayers", token, csvText, "text/csv");
  }

  mine(token: string) {
    return this.send<MineBody & ErrorBody>("POST", "/api/bir/mine", token, {});
  }

  issueTin(token: string, taxpayerId: string) {
    return this.send<IssueTinBody & ErrorBody>(
      "POST", `/api/admin/tin/${encodeURIComponent(taxpayerId)}`, token, {});
  }

  changePassword(token: string, old: string, next: string, confirm: string) {
    return this.send<{ display_message: string } & ErrorBody>(
      "POST", "/api/taxpayer/password", token, { old, new: next, confirm });
  }

  viewAssessment(token: string) {
    return this.send<AssessmentBody & ErrorBody>(
      "GET", "/api/taxpayer/assessment", token);
  }

  writeAssessment(token: string, taxKobo: number) {
    return this.send<ErrorBody>(
      "POST", "/api/taxpayer/assessment", token, { tax_kobo: taxKobo });
  }

  requestReferenceCode(token: string) {
    return this.send<SlipBody & ErrorBody>(
      "POST", "/api/taxpayer/reference-code", token, {});
  }

  reprintReceipt(token: string, code: string) {
    return this.send<ReceiptBody & ErrorBody>(
      "GET", `/api/taxpayer/receipt/${encodeURIComponent(code)}`, token);
  }

  bankLookup(token: string, code: string, presenterTin?: string) {
    const query = presenterTin ? `?presenter=${encodeURIComponent(presenterTin)}` : "";
    return this.send<LookupBody & ErrorBody>(
      "GET", `/api/bank/lookup/${encodeURIComponent(code)}${query}`, token);
  }

  recordPayment(token: string, code: string, presenterTin: string, cashAmountKobo: number) {
    return this.send<PaymentBody & ErrorBody>(
      "POST", "/api/bank/payment", token,
      { code, presenter_tin: presenterTin, cash_amount_kobo: cashAmountKobo });
  }
}
