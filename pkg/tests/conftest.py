import json

import pytest

from gmshadow.experiment import RunConfig, cmd_simulate
from gmshadow.params import ModelParams


@pytest.fixture(scope="session")
def acceptance_run(tmp_path_factory):
    """The default constructed-data run, integrated to sup(u) >= 1e9.

    Shared by the acceptance criteria and the trajectory-level invariant
    tests; takes a couple of seconds once per session.
    """
    out = tmp_path_factory.mktemp("acceptance") / "default_run"
    config = RunConfig(params=ModelParams(), blowup_threshold=1e9)
    result = cmd_simulate(config, out)
    assert result.ok, "acceptance run failed: " + json.dumps(result.manifest["stages"])
    with open(out / "reports" / "diagnostics.json") as fh:
        diagnostics = json.load(fh)
    return {"run_dir": out, "config": config, "manifest": result.manifest,
            "diagnostics": diagnostics}
