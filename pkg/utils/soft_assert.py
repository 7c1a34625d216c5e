from dataclasses import dataclass


@dataclass(frozen=True)
class Violation:
    """A single failed invariant, named together with the sites that break it."""

    invariant: str
    sites: tuple[int, ...] = ()
    detail: str = ''

    def __str__(self) -> str:
        sites = ','.join(str(site) for site in self.sites)
        return f'{self.invariant} [{sites}] {self.detail}'.strip()


class SoftAssertContextManager:
    """
    A context manager for soft assertions.
    Collects invariant violations and allows the check (or test) to continue running.
    """

    def __init__(self):
        self.failures: list[Violation] = []

    def __enter__(self):
        """
        Start the soft assertion context.
        """
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        """
        Capture assertion failures and store them as violations.
        """
        if exc_type is AssertionError:
            self.failures.append(Violation('assertion', detail=f'line {traceback.tb_lineno}: {exc_value}'))
            return True  # Suppress the exception

    def expect(self, condition: bool, invariant: str, sites: tuple[int, ...] = (), detail: str = '') -> bool:
        """
        Record a violation when the condition does not hold.

        Args:
            condition (bool): The checked property.
            invariant (str): Short name of the invariant.
            sites (tuple[int, ...]): Offending sites, if any.
            detail (str): Human-readable context.

        Returns:
            bool: The condition itself, so callers can branch on it.
        """
        if not condition:
            self.failures.append(Violation(invariant, tuple(sites), detail))
        return bool(condition)

    def has_failures(self) -> bool:
        """
        Check if there are any failures recorded.
        """
        return bool(self.failures)

    def get_failures(self) -> list[Violation]:
        """
        Retrieve all recorded failures.
        """
        return list(self.failures)
