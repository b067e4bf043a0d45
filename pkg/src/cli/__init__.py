from .commands import audit_command, run_command, verify_command

__all__ = ["run_command", "verify_command", "audit_command"]
