"""
Output Manager Utility
Writes sample dumps (CSV) and run summaries (JSON) with reproducible formatting
"""

import json
import sys
from pathlib import Path
from typing import Optional, Dict, Any

import numpy as np
import pandas as pd

sys.path.append(str(Path(__file__).parent.parent))

from utils.config_loader import get_config, PROJECT_ROOT
from utils.logger import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = "1.0"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


class OutputManager:
    """Manages the output directory and file formats"""

    def __init__(self, output_dir: Optional[str] = None):
        self.config = get_config()
        out = Path(output_dir or self.config.get('paths.outputs', 'outputs'))
        self.output_dir = out if out.is_absolute() else PROJECT_ROOT / out
        self.float_format = self.config.get('outputs.float_format', '%.17g')
        self.schema_version = str(self.config.get('outputs.schema_version', SCHEMA_VERSION))

    def path_for(self, filename: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / filename

    def write_dataframe(self, df: pd.DataFrame, filename: str) -> Path:
        """
        Write a DataFrame as CSV

        Args:
            df: Sample dump or table
            filename: File name inside the output directory

        Returns:
            Path of the written file
        """
        path = self.path_for(filename)
        try:
            df.to_csv(path, index=False, float_format=self.float_format, lineterminator="\n")
            logger.info(f"Wrote {len(df)} rows to {path}")
            return path
        except Exception as e:
            logger.error(f"Failed to write {path}: {e}")
            raise

    def write_json(self, payload: Dict[str, Any], filename: str) -> Path:
        """Write a JSON summary; schema_version is always present"""
        path = self.path_for(filename)
        document = {"schema_version": self.schema_version, **payload}
        try:
            with open(path, 'w') as f:
                json.dump(document, f, indent=2, sort_keys=True, default=_json_default)
                f.write("\n")
            logger.info(f"Wrote summary to {path}")
            return path
        except Exception as e:
            logger.error(f"Failed to write {path}: {e}")
            raise

    def read_dataframe(self, filename: str) -> pd.DataFrame:
        """Read a previously written CSV dump"""
        path = self.output_dir / filename
        try:
            df = pd.read_csv(path)
            logger.debug(f"Read {len(df)} rows from {path}")
            return df
        except Exception as e:
            logger.error(f"Failed to read {path}: {e}")
            raise

    def read_json(self, filename: str) -> Dict[str, Any]:
        with open(self.output_dir / filename, 'r') as f:
            return json.load(f)


# Singleton instance
_output_manager = None


def get_output_manager(output_dir: Optional[str] = None) -> OutputManager:
    """Get singleton OutputManager instance (a new one when output_dir changes)"""
    global _output_manager
    if _output_manager is None or (
        output_dir is not None and Path(output_dir).resolve() != _output_manager.output_dir.resolve()
    ):
        _output_manager = OutputManager(output_dir)
    return _output_manager
