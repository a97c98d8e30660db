"""
Optional Sentry reporting. Enabled only when CONSENSUS_LAB_SENTRY_DSN is set.
"""
import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration

from consensus_lab import __version__
from consensus_lab.core.config import settings


def init_sentry() -> bool:
    dsn = settings.SENTRY_DSN
    if not dsn:
        return False
    # failed runs are logged with logger.exception, which is what gets reported
    logging_integration = LoggingIntegration(level=None, event_level="ERROR")
    sentry_sdk.init(
        dsn,
        integrations=[logging_integration],
        release=f"consensus-lab@{__version__}",
        traces_sample_rate=0.0,
    )
    return True


def tag_run(algorithm: str, topology: str, seed: int) -> None:
    """Attach the failing run's coordinates to the current scope; no-op without a client."""
    sentry_sdk.set_tag("algorithm", algorithm)
    sentry_sdk.set_tag("topology", topology)
    sentry_sdk.set_tag("seed", str(seed))
