import json
import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def truths():
    """Frozen simulation-oracle ground truth for the default DgpSpec."""
    with open(FIXTURES / "oracle_truths.json") as fh:
        return json.load(fh)
