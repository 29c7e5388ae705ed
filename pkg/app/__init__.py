"""Low-degree testing toolkit over finite fields GF(p^s)."""

__version__ = "0.1.0"
