from cli.commands import RUNNERS, RunContext, execute, resolve_output_dir, run
from cli.manifest import SCHEMAS, FieldSpec, Manifest, apply_overrides, describe, load_manifest, validate_manifest
