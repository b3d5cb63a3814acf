import { describe, expect, it } from "vitest";

import {
  AMOUNT_BLOCKED,
  classify,
  EXTRACTION_OK,
  FRAUD_ALERT,
  INVALID_STAFF_LOGIN,
  INVALID_TIN_LOGIN,
  MESSAGE_TABLE,
  NO_EARNINGS,
  PASSWORD_CHANGED,
  screenMessage,
  TRANSACTION_OK,
  WELCOME,
} from "../src/messages.js";

// Independent copy of the wire contract. None of these literals come from
// src/messages.ts, so any drift in a constant fails the snapshot.
const EXPECTED: Record<string, string> = {
  welcome: "Welcome!",
  invalid_tin_login: "Invalid TIN or password...try again",
  invalid_staff_login: "Invalid username or password...try again",
  amount_blocked: "Amount cannot be altered by taxpayers.",
  extraction_ok: "Extraction successful!",
  no_earnings:
    "Tax payers cannot be clustered into tiers.." +
    "No records found on earnings or profit margin",
  password_changed: "Password change successful!",
  transaction_ok: "Transaction ... successful!",
  fraud_alert: "Fraud Attempt Alert!!!",
};

describe("message table", () => {
  it("matches the wire contract byte for byte", () => {
    expect(MESSAGE_TABLE).toEqual(EXPECTED);
  });

  it("exports each named constant with its exact text", () => {
    expect(WELCOME).toBe(EXPECTED.welcome);
    expect(INVALID_TIN_LOGIN).toBe(EXPECTED.invalid_tin_login);
    expect(INVALID_STAFF_LOGIN).toBe(EXPECTED.invalid_staff_login);
    expect(AMOUNT_BLOCKED).toBe(EXPECTED.amount_blocked);
    expect(EXTRACTION_OK).toBe(EXPECTED.extraction_ok);
    expect(NO_EARNINGS).toBe(EXPECTED.no_earnings);
    expect(PASSWORD_CHANGED).toBe(EXPECTED.password_changed);
    expect(TRANSACTION_OK).toBe(EXPECTED.transaction_ok);
    expect(FRAUD_ALERT).toBe(EXPECTED.fraud_alert);
  });

  it("contains no HTML-active characters, so escaping is the identity", () => {
    for (const text of Object.values(MESSAGE_TABLE)) {
      expect(text).not.toMatch(/[&<>"']/);
    }
  });
});

describe("classify", () => {
  it("marks the fraud alert as alert severity, always", () => {
    expect(classify(FRAUD_ALERT)).toBe("alert");
    expect(screenMessage(FRAUD_ALERT)).toEqual({
      text: FRAUD_ALERT,
      severity: "alert",
    });
  });

  it("marks confirmations as success", () => {
    for (const text of [WELCOME, EXTRACTION_OK, PASSWORD_CHANGED, TRANSACTION_OK]) {
      expect(classify(text)).toBe("success");
    }
  });

  it("marks rejections as error", () => {
    for (const text of [
      INVALID_TIN_LOGIN,
      INVALID_STAFF_LOGIN,
      AMOUNT_BLOCKED,
      NO_EARNINGS,
    ]) {
      expect(classify(text)).toBe("error");
    }
  });

  it("falls back to info for texts outside the table", () => {
    expect(classify("TIN sent to the contact on record for TP000001.")).toBe("info");
  });

  it("assigns every table entry a severity", () => {
    for (const text of Object.values(MESSAGE_TABLE)) {
      expect(["info", "success", "error", "alert"]).toContain(classify(text));
    }
  });
});
