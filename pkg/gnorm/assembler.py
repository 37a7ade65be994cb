import json
import os
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional

from lxml import etree

from gnorm.config import GNORM_PREFIX


class Assembler(ABC):
    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        pass

    @abstractmethod
    def to_xml(self) -> Optional[etree._Element]:
        pass

    def to_json(self, indent: Optional[int] = 2) -> str:
        """Serializes the dict representation of the object to a JSON string with sorted keys."""
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def to_string(self) -> str:
        """Serializes the xml representation of the object to a string.

        Returns:
            A pretty printed string representation of the object, empty if there is no xml representation.
        """
        xml = self.to_xml()
        return (
            ""
            if xml is None
            else str(
                etree.tostring(
                    xml,
                    encoding="unicode",
                    pretty_print=True,
                )
            )
        )

    def to_file(
        self,
        name: str,
        folder: Optional[str | Path] = None,
        format: str = "json",
        inclusive_ns_prefixes: List[str] = [],
    ) -> Path:
        """Writes the object to `<folder>/<name>.<format>`, creating the folder if needed.

        Args:
            name: The file name without extension.
            folder: The target folder, the current working directory if missing.
            format: Either "json" or "xml".

        Returns:
            The path of the written file.

        Raises:
            ValueError: If the format is unknown.
            Exception: If the object has no xml representation.
        """
        folder = (
            folder
            if isinstance(folder, str)
            else (
                str(folder.absolute())
                if isinstance(folder, Path)
                else os.path.abspath(os.getcwd())
            )
        )
        os.makedirs(folder, exist_ok=True)
        if format == "json":
            path = Path(folder) / (name + ".json")
            path.write_text(self.to_json() + "\n", encoding="utf-8")
            return path
        if format != "xml":
            raise ValueError("Unknown output format: '{}'".format(format))
        xml = self.to_xml()
        if xml is None:
            raise Exception("Failed to create xml")
        path = Path(folder) / (name + ".xml")
        etree.ElementTree(xml).write(
            str(path),
            encoding="UTF-8",
            pretty_print=True,
            inclusive_ns_prefixes=[GNORM_PREFIX] + inclusive_ns_prefixes,
            xml_declaration=True,
            standalone=False,
        )
        return path
