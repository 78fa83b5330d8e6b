"""
Output Schemas
pandera schemas for every CSV dump; dumps are validated before they are written
"""

from pathlib import Path
from typing import Dict
import sys

import pandas as pd
import pandera as pa

sys.path.append(str(Path(__file__).parent.parent))

from utils.errors import OutputSchemaError
from utils.logger import get_logger

logger = get_logger(__name__)

_UNIT = pa.Check.in_range(0.0, 1.0)
_SAMPLE_ID = pa.Column(int, pa.Check.ge(0), unique=True)


def _orbit_schema(name: str, direction: str) -> pa.DataFrameSchema:
    """sample_id, r, <direction>1.., x1.., raw_discrepancy, normalized"""
    return pa.DataFrameSchema(
        {
            "sample_id": _SAMPLE_ID,
            "r": pa.Column(float, pa.Check.gt(0.0)),
            rf"^{direction}\d+$": pa.Column(float, regex=True),
            r"^x\d+$": pa.Column(float, _UNIT, regex=True),
            "raw_discrepancy": pa.Column(float),
            "normalized": pa.Column(float),
        },
        name=name,
        coerce=True,
    )


TRANSLATION_SCHEMA = _orbit_schema("translation", "alpha").add_columns(
    {"alpha_resamples": pa.Column(int, pa.Check.ge(0), required=False)}
)
KESTEN_SCHEMA = _orbit_schema("kesten", "alpha")
FLOW_SCHEMA = _orbit_schema("flow", "v")
GEODESIC_SCHEMA = _orbit_schema("geodesic", "v")

LIMIT_SCHEMA = pa.DataFrameSchema(
    {
        "sample_id": _SAMPLE_ID,
        "value": pa.Column(float),
        "skipped_terms": pa.Column(int, pa.Check.ge(0)),
        "short_flags": pa.Column(int, pa.Check.ge(0)),
        "resampled": pa.Column(int, pa.Check.ge(0)),
    },
    name="limit",
    coerce=True,
)

COMPARE_SCHEMA = pa.DataFrameSchema(
    {
        "source": pa.Column(str, pa.Check.isin(["orbit", "limit"])),
        "sample_id": pa.Column(int, pa.Check.ge(0)),
        "value": pa.Column(float),
    },
    name="compare",
    coerce=True,
)

RESONANT_SET_SCHEMA = pa.DataFrameSchema(
    {
        r"^k\d+$": pa.Column(int, regex=True),
        "k_last": pa.Column(int),
        r"^m\d+$": pa.Column(int, regex=True),
        "p": pa.Column(int, pa.Check.ne(0)),
        r"^X\d+$": pa.Column(float, regex=True),
        "Z": pa.Column(float),
        "R": pa.Column(float, pa.Check.ge(0.0)),
    },
    name="resonant_set",
    coerce=True,
)

RESONANT_PROFILE_SCHEMA = pa.DataFrameSchema(
    {
        "sample_id": pa.Column(int, pa.Check.ge(0)),
        "eps": pa.Column(float, pa.Check.gt(0.0)),
        "direct": pa.Column(float),
        "resonant": pa.Column(float),
        "residual": pa.Column(float),
    },
    name="resonant_profile",
    coerce=True,
)

TAIL_VARIANCE_SCHEMA = pa.DataFrameSchema(
    {
        r"^m\d+$": pa.Column(int, regex=True),
        "R": pa.Column(float, pa.Check.ge(0.0)),
        "Z": pa.Column(float),
        "gamma": pa.Column(float, pa.Check.ge(0.0)),
        "gamma_tail": pa.Column(float, pa.Check.ge(0.0)),
        "variance": pa.Column(float, pa.Check.ge(0.0)),
    },
    name="tail_variance",
    coerce=True,
)

EQUIDISTRIBUTION_SCHEMA = pa.DataFrameSchema(
    {
        "N": pa.Column(int, pa.Check.ge(1)),
        "mean": pa.Column(float),
        "stderr": pa.Column(float, nullable=True),
        "samples": pa.Column(int, pa.Check.ge(1)),
        "short_vector_flags": pa.Column(int, pa.Check.ge(0)),
    },
    name="equidistribution",
    coerce=True,
)

CYLINDER_SCHEMA = pa.DataFrameSchema(
    {
        "instance": pa.Column(int, pa.Check.ge(0), unique=True),
        "r": pa.Column(float, pa.Check.gt(0.0)),
        "T": pa.Column(float, pa.Check.gt(0.0)),
        "count": pa.Column(int, pa.Check.ge(0)),
        "bruteforce": pa.Column(int, pa.Check.ge(0)),
        "volume": pa.Column(float, pa.Check.gt(0.0)),
        "discrepancy": pa.Column(float),
    },
    name="cylinder",
    coerce=True,
)

SCHEMAS: Dict[str, pa.DataFrameSchema] = {
    "translation": TRANSLATION_SCHEMA,
    "kesten": KESTEN_SCHEMA,
    "flow": FLOW_SCHEMA,
    "geodesic": GEODESIC_SCHEMA,
    "limit": LIMIT_SCHEMA,
    "compare": COMPARE_SCHEMA,
    "resonant_set": RESONANT_SET_SCHEMA,
    "resonant_profile": RESONANT_PROFILE_SCHEMA,
    "tail_variance": TAIL_VARIANCE_SCHEMA,
    "equidistribution": EQUIDISTRIBUTION_SCHEMA,
    "cylinder": CYLINDER_SCHEMA,
}


def validate_frame(frame: pd.DataFrame, schema_name: str) -> pd.DataFrame:
    """
    Validate a dump against its schema

    Returns:
        The coerced frame

    Raises:
        OutputSchemaError: unknown schema or failed checks
    """
    if schema_name not in SCHEMAS:
        raise OutputSchemaError(f"unknown output schema: {schema_name}")
    try:
        validated = SCHEMAS[schema_name].validate(frame)
        logger.debug(f"✓ {len(frame)} rows match schema '{schema_name}'")
        return validated
    except (pa.errors.SchemaError, pa.errors.SchemaErrors) as e:
        logger.error(f"Schema validation failed for '{schema_name}': {e}")
        raise OutputSchemaError(f"dump does not match schema '{schema_name}': {e}") from e
