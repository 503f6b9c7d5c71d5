"""Regenerate tests/fixtures/fk_cases.json from the backend's kinematics.

Run from the repository root with the backend installed:

    python3 frontend/scripts/gen_fk_fixtures.py
"""

import json
from pathlib import Path

import numpy as np

from handpilot import kinematics as kin
from handpilot.sim import HOME_Q

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "fk_cases.json"


def main() -> None:
    chain = kin.DEFAULT_CHAIN
    rng = np.random.default_rng(2026)
    configurations = [np.zeros(6), np.array(HOME_Q)]
    configurations += [rng.uniform(-2.0, 2.0, 6) for _ in range(18)]
    cases = []
    for q in configurations:
        pose = kin.fk(chain, q)
        cases.append(
            {
                "q": [float(v) for v in q],
                "pos": [float(v) for v in pose.position],
                "quat": [float(v) for v in pose.quaternion],
            }
        )
    fixture = {
        "dh": [
            {"a": row.a, "d": row.d, "alpha": row.alpha, "theta_offset": row.theta_offset}
            for row in chain.rows
        ],
        "cases": cases,
    }
    OUT.write_text(json.dumps(fixture, indent=1))
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
