from typing import Dict, List, Tuple, Optional, Any
import logging

logger = logging.getLogger(__name__)

class PayloadValidator:
    """Validates decoded contract-call payloads and SLA status transitions"""

    TYPE_MAP = {
        'string': str,
        'int': int,
        'number': (int, float),
        'bool': bool,
        'dict': dict,
        'list': list
    }

    def validate_required_fields(self, data: Dict, required_fields: List[str]) -> Tuple[bool, Optional[str]]:
        """Validate that all required fields are present in the data"""
        missing_fields = [field for field in required_fields if field not in data]
        if missing_fields:
            return False, f"Missing required fields: {', '.join(missing_fields)}"
        return True, None

    def validate_data_types(self, data: Dict, field_types: Dict[str, str]) -> Tuple[bool, Optional[str]]:
        """Validate that fields have correct data types"""
        for field, expected_type in field_types.items():
            if field not in data or expected_type not in self.TYPE_MAP:
                continue
            value = data[field]
            # bool is an int subclass; never accept it for numeric fields
            if isinstance(value, bool) and expected_type != 'bool':
                return False, f"Field '{field}' should be of type {expected_type}"
            if not isinstance(value, self.TYPE_MAP[expected_type]):
                return False, f"Field '{field}' should be of type {expected_type}"
        return True, None

    def validate_state_transition(
        self,
        current_state: str,
        target_state: str,
        allowed_transitions: List[str]
    ) -> Tuple[bool, Optional[str]]:
        """Validate if a state transition is allowed"""
        if target_state not in allowed_transitions:
            return False, f"Invalid transition from {current_state} to {target_state}"
        return True, None

    def validate_call(self, data: Any, required_fields: List[str], field_types: Dict[str, str]) -> Tuple[bool, Optional[str]]:
        """Run the field and type checks for one contract call"""
        if not isinstance(data, dict):
            return False, "Payload is not an object"
        valid, error = self.validate_required_fields(data, required_fields)
        if not valid:
            return valid, error
        return self.validate_data_types(data, field_types)
