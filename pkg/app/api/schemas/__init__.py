"""
Schemas for config files and manifests
"""
from app.api.schemas.config_schema import CliConfigSchema
from app.api.schemas.manifest_schema import ManifestRecordSchema

__all__ = [
    'CliConfigSchema',
    'ManifestRecordSchema',
]
