"""Seed the run registry by running the preset configs end to end."""

import argparse
import sys
from pathlib import Path

from segflow.cli import main as segflow_main
from segflow.config_utils import CALORIC_PRESETS, load_config
from segflow.registry_utils import registry_url

DEFAULT_CONFIGS = [
    "configs/ground_state_1d.toml",
    "configs/two_phase_1d.toml",
    "configs/caloric_linear.toml",
    "configs/caloric_quadratic.toml",
]


def populate(configs, url):
    failures = 0
    for path in configs:
        config = load_config(path)
        commands = ["run"]
        if config.probe.bases:
            commands.append("freq")
        if config.initial.preset not in CALORIC_PRESETS:
            commands.append("partition")
        for command in commands:
            code = segflow_main(["--registry", url, command, str(path)])
            if code != 0:
                print(f"Error running {command} for {path} (exit code {code})")
                failures += 1
                break
        else:
            print(f"Successfully registered {config.name}")
    return failures


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("configs", nargs="*", default=DEFAULT_CONFIGS)
    parser.add_argument("--registry", default=None, help="SQLAlchemy URL (default: SEGFLOW_REGISTRY or sqlite)")
    parser.add_argument("--with-2d", action="store_true", help="Also run the 65x65 square (several minutes)")
    args = parser.parse_args()

    configs = [Path(p) for p in args.configs]
    if args.with_2d:
        configs.append(Path("configs/square_2d.toml"))
    return 1 if populate(configs, registry_url(args.registry)) else 0


if __name__ == "__main__":
    sys.exit(main())
