from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any

import xmlschema
from lxml import etree

SCHEMA_FOLDER = Path(__file__).parent / "schema"


class Schema(str, Enum):
    REPORT = "report.xsd"


@lru_cache(maxsize=None)
def _load(schema: Schema) -> xmlschema.XMLSchema11:
    return xmlschema.XMLSchema11(str(SCHEMA_FOLDER / schema.value))


class Validator:
    def __validate(self, element: etree._Element, schema: Schema) -> None:
        resource: Any = element
        _load(schema).validate(resource)

    def validate_report(self, element: etree._Element):
        """Raises an xmlschema validation error if the element is not a valid bounds report."""
        return self.__validate(element, Schema.REPORT)
