from .orchestration_service import OrchestrationService

__all__ = ["OrchestrationService"]
