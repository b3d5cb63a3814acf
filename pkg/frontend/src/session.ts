// Browser-side view session. The bearer token lives only in this module and
// in Authorization headers; render code never receives it, so it can never
// end up in the page.

import { screenMessage, type ScreenMessage } from "./messages.js";

export type Role = "Admin" | "BirStaff" | "BankStaff" | "Taxpayer";

export interface ViewSession {
  token: string;
  role: Role;
  displayName: string;
  tin?: string;
}

let currentSession: ViewSession | null = null;

export function setSession(session: ViewSession): void {
  currentSession = session;
}

export function getSession(): ViewSession | null {
  return currentSession;
}

export function clearSession(): void {
  currentSession = null;
}

export type Screen =
  | "login"
  | "change-password"
  | "admin-home"
  | "bir-console"
  | "taxpayer-home"
  | "bank-desk";

const HOME_SCREEN: Record<Role, Screen> = {
  Admin: "admin-home",
  BirStaff: "bir-console",
  BankStaff: "bank-desk",
  Taxpayer: "taxpayer-home",
};

export function homeScreen(role: Role): Screen {
  return HOME_SCREEN[role];
}

/** Role gates navigation: each role sees login plus its own screens only. */
export function canView(role: Role, screen: Screen): boolean {
  if (screen === "login") return true;
  if (screen === "change-password") return role === "Taxpayer";
  return HOME_SCREEN[role] === screen;
}

export type LoginRoute =
  | { kind: "navigate"; screen: Screen; session: ViewSession }
  | { kind: "force-password-change"; session: ViewSession }
  | { kind: "rejected"; message: ScreenMessage };

interface LoginBody {
  display_message?: string;
  token?: string;
  role?: string;
  display_name?: string;
  tin?: string;
  must_change_password?: boolean;
}

/** Decides where a login response sends the user. Provisional taxpayers are
 *  forced through the change-password screen before anything else. */
export function routeAfterLogin(status: number, body: LoginBody): LoginRoute {
  if (status !== 200 || !body.token || !body.role) {
    return { kind: "rejected", message: screenMessage(body.display_message ?? "") };
  }
  const session: ViewSession = {
    token: body.token,
    role: body.role as Role,
    displayName: body.display_name ?? "",
    tin: body.tin,
  };
  if (session.role === "Taxpayer" && body.must_change_password) {
    return { kind: "force-password-change", session };
  }
  return { kind: "navigate", screen: homeScreen(session.role), session };
}
