"""The fixed table of user-visible screen messages.

Every string a user ever sees on screen is drawn verbatim from here; tests
and the web client assert byte-for-byte equality, so never edit in place —
the exact text is part of the wire contract.
"""

WELCOME = "Welcome!"
INVALID_TIN_LOGIN = "Invalid TIN or password...try again"
INVALID_STAFF_LOGIN = "Invalid username or password...try again"
AMOUNT_BLOCKED = "Amount cannot be altered by taxpayers."
EXTRACTION_OK = "Extraction successful!"
NO_EARNINGS = (
    "Tax payers cannot be clustered into tiers.."
    "No records found on earnings or profit margin"
)
PASSWORD_CHANGED = "Password change successful!"
TRANSACTION_OK = "Transaction ... successful!"
FRAUD_ALERT = "Fraud Attempt Alert!!!"

MESSAGE_TABLE = {
    "welcome": WELCOME,
    "invalid_tin_login": INVALID_TIN_LOGIN,
    "invalid_staff_login": INVALID_STAFF_LOGIN,
    "amount_blocked": AMOUNT_BLOCKED,
    "extraction_ok": EXTRACTION_OK,
    "no_earnings": NO_EARNINGS,
    "password_changed": PASSWORD_CHANGED,
    "transaction_ok": TRANSACTION_OK,
    "fraud_alert": FRAUD_ALERT,
}
