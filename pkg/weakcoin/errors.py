"""
Error types for weakcoin

Every error carries the process exit code the command line maps it to:
- InvalidArgumentError: bad parameters, size mismatches (exit 2)
- DegenerateProtocolError: zero-mass sides, undefined projectors (exit 2,
  or 3 when raised while building a certificate)
- CertificateRejectedError: a certificate failed verification (exit 3)
- ResourceLimitError: state too large for the simulation caps (exit 4)
"""

from typing import Any, Dict, Optional


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_REJECTED = 3
EXIT_RESOURCE = 4


class WeakCoinError(Exception):
    """Base class for all weakcoin errors"""
    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Error document for JSON output"""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            **({"details": self.details} if self.details else {}),
        }


class InvalidArgumentError(WeakCoinError, ValueError):
    """Input failed validation"""
    exit_code = EXIT_VALIDATION


class DegenerateProtocolError(WeakCoinError):
    """The protocol instance makes a requested object undefined"""
    exit_code = EXIT_VALIDATION


class CertificateRejectedError(WeakCoinError):
    """A dual certificate did not pass verification"""
    exit_code = EXIT_REJECTED


class ResourceLimitError(WeakCoinError):
    """A simulation would exceed the configured size caps"""
    exit_code = EXIT_RESOURCE
