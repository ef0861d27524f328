"""Exception hierarchy shared across the pipeline."""


class FormflowError(Exception):
    """Base class for all domain errors; CLI maps these to exit code 1."""


# --- DOCX ---------------------------------------------------------------

class NotDocx(FormflowError):
    """Input is not a ZIP archive or lacks the main document part."""


class MalformedXml(FormflowError):
    """The main document part exists but does not parse."""


class UnknownRun(FormflowError):
    """An edit targets a (paragraph, run) pair not present in the document."""


class UnbalancedBraces(FormflowError):
    """An opening '{{' has no matching '}}' within the same paragraph."""


# --- PDF ----------------------------------------------------------------

class NotPdf(FormflowError):
    """Input bytes do not start with a PDF header."""


class EncryptedPdf(FormflowError):
    """Encrypted PDFs are unsupported."""


class PdfParseError(FormflowError):
    """Structural damage while reading PDF objects or cross-reference data."""


class UnknownField(FormflowError):
    """A fill request names a form field that does not exist."""


class TypeMismatch(FormflowError):
    """Boolean supplied for a text field, string for a checkbox, etc."""


class AppearanceFailure(FormflowError):
    """Field too degenerate to render visible text at the minimum font size."""


# --- rasterization / OCR --------------------------------------------------

class RendererUnavailable(FormflowError):
    """No rasterizer adapter is configured or the configured one is missing."""


class RenderFailure(FormflowError):
    """A page failed to rasterize."""


class OcrUnavailable(FormflowError):
    """No OCR adapter is configured or the configured one is missing."""


class OcrFailure(FormflowError):
    """A page failed to OCR (the pipeline degrades, it does not abort)."""


# --- LLM client / stages --------------------------------------------------

class SchemaViolation(FormflowError):
    """A model response failed validation even after the repair retry."""


class BudgetExceeded(FormflowError):
    """A composed prompt exceeds the request budget and cannot be chunked."""


class ReplayMiss(FormflowError):
    """Replay mode found no transcript record for the request digest."""

    def __init__(self, digest: str):
        super().__init__(f"no transcript record for request digest {digest}")
        self.digest = digest


class TransportError(FormflowError):
    """The chat-completion endpoint stayed unreachable after retries."""


# --- interview assembly -----------------------------------------------------

class UnboundVariable(FormflowError):
    """A question references a variable with no binding."""


class DuplicateVariable(FormflowError):
    """The same variable appears in more than one question screen."""


class MissingAnswer(FormflowError):
    """An answer set does not cover every required variable."""

    def __init__(self, variables):
        self.variables = list(variables)
        super().__init__("missing answers for: " + ", ".join(self.variables))


class ValidationFailure(FormflowError):
    """One or more answer values failed their datatype rules."""

    def __init__(self, failures):
        # failures: list of (variable, message)
        self.failures = list(failures)
        lines = "; ".join(f"{v}: {m}" for v, m in self.failures)
        super().__init__(f"invalid answers: {lines}")


# --- pipeline ---------------------------------------------------------------

class StageOrderViolation(FormflowError):
    """A stage was requested out of order or before its prerequisite."""
