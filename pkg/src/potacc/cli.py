"""potacc command line: a thin client over the service layer.

All computation happens behind the service API; the CLI marshals files and
flags into requests and renders responses. By default the service runs
in-process; `--server URL` (or POTACC_SERVER) sends the same requests to a
remote instance instead.

Exit codes: 0 success, 1 validation failure, 2 I/O error.
"""

from __future__ import annotations

import base64
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from .client import ServiceClient
from .errors import PotaccError
from .models import FIXTURE_NAMES, inline_weight_payloads
from .reports import report_to_csv
from .service import schemas

METHOD_CHOICES = click.Choice(["qkeras", "msq", "apot", "uniform"])
PROFILE_CHOICES = click.Choice(["analytic", "measured"])


def _parse_shape(text: str) -> list[int]:
    try:
        dims = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise PotaccError(f"bad shape {text!r}; expected e.g. 4 or 16x32")
    if any(d < 0 for d in dims):
        raise PotaccError(f"bad shape {text!r}; dims must be non-negative")
    return dims


def _load_config_dict(path: str | None) -> dict | None:
    if not path:
        return None
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise PotaccError("config file must hold a JSON object")
    return data


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PotaccError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except json.JSONDecodeError as exc:
            click.echo(f"error: invalid JSON input: {exc}", err=True)
            sys.exit(1)
        except ConnectionError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
@click.option("--server", envvar="POTACC_SERVER", default=None,
              help="Remote service URL; default runs the service in-process.")
@click.pass_context
def main(ctx, server):
    """Quantize weight tensors and simulate shift-based accelerators."""
    ctx.obj = ServiceClient(server)


@main.command()
@click.argument("input_path", type=click.Path())
@click.argument("output_path", type=click.Path())
@click.option("--method", type=METHOD_CHOICES, required=True)
@click.option("--shape", required=True, help="Tensor shape, e.g. 16x32.")
@click.option("--scale-exp", type=int, default=None,
              help="Power-of-two tensor scale exponent (method default if omitted).")
@click.option("--from-int8-pot", is_flag=True,
              help="Input holds int8 +-2**e weights to re-encode, not floats.")
@click.option("--json", "json_path", type=click.Path(), default=None,
              help="Also write the error stats as JSON.")
@click.pass_obj
@handle_errors
def quantize(client, input_path, output_path, method, shape, scale_exp, from_int8_pot, json_path):
    """Quantize a raw tensor file (little-endian float32) into a POTQ file."""
    payload = Path(input_path).read_bytes()
    req = schemas.QuantizeRequest(
        method=method,
        shape=_parse_shape(shape),
        data_b64=base64.b64encode(payload).decode("ascii"),
        scale_exp=scale_exp,
        from_int8_pot=from_int8_pot,
    )
    resp = client.quantize(req)
    Path(output_path).write_bytes(base64.b64decode(resp.potq_b64))
    s = resp.stats
    click.echo(f"wrote {output_path}: {s.count} weights, mse {s.mse:.3e}, "
               f"max |err| {s.max_abs_error:.3e}")
    if s.levels:
        click.echo("level histogram:")
        for lv in s.levels:
            click.echo(f"  {lv.level:>12.6f}  {lv.count}")
    if json_path:
        Path(json_path).write_text(json.dumps(resp.stats.model_dump(), indent=1) + "\n")


@main.command("pe-check")
@click.option("--method", "methods", type=METHOD_CHOICES, multiple=True,
              help="Restrict to specific PE kinds (default: all).")
@click.pass_obj
@handle_errors
def pe_check(client, methods):
    """Sweep every activation x weight pair against the exact oracle."""
    resp = client.pe_check(schemas.PECheckRequest(methods=list(methods) or None))
    for r in resp.results:
        status = "pass" if r.passed else "FAIL"
        click.echo(f"{r.kind:14s} {r.cases:6d} cases  {status}")
        for f in r.failures:
            click.echo(f"  act={f.act} weight={f.weight} got={f.got} expected={f.expected}")
    if not resp.passed:
        click.echo("pe-check failed", err=True)
        sys.exit(1)
    click.echo("all PE datapaths match the exact oracle")


@main.command()
@click.option("--method", "methods", type=METHOD_CHOICES, multiple=True,
              help="PE kinds to benchmark (default: all four).")
@click.option("--profile", type=PROFILE_CHOICES, default="measured", show_default=True)
@click.option("--overhead", type=int, default=None, help="Per-tile overhead cycles override.")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--case", default=None, help="Run a single MxNxK case instead of the suite.")
@click.option("--config", "config_path", envvar="POTACC_CONFIG", type=click.Path(), default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--json", "json_path", type=click.Path(), default=None)
@click.pass_obj
@handle_errors
def bench(client, methods, profile, overhead, seed, case, config_path, csv_path, json_path):
    """Run the 27-case synthetic GEMM suite against the uniform baseline."""
    req = schemas.BenchRequest(
        methods=list(methods) or None,
        profile=profile,
        overhead=overhead,
        seed=seed,
        case=case,
        config=_load_config_dict(config_path),
    )
    resp = client.bench(req)
    click.echo(f"profile: {resp.profile} ({resp.n_cases} cases)")
    click.echo(f"{'kind':14s} {'avg speedup':>12s} {'(ref)':>7s} {'avg energy red.':>16s} {'(ref)':>7s}")
    for s in resp.summaries:
        click.echo(
            f"{s.kind:14s} {s.average_speedup:12.4f} {s.reference_speedup:7.2f} "
            f"{s.average_energy_reduction:16.4f} {s.reference_energy_reduction:7.2f}"
        )
    if resp.note:
        click.echo(f"note: {resp.note}")
    if csv_path:
        _write_bench_csv(resp, csv_path)
        click.echo(f"wrote {csv_path}")
    if json_path:
        Path(json_path).write_text(resp.model_dump_json(indent=1) + "\n")
        click.echo(f"wrote {json_path}")


def _write_bench_csv(resp: schemas.BenchResponse, path):
    import csv as _csv

    with open(path, "w", newline="") as f:
        w = _csv.writer(f, lineterminator="\n")
        w.writerow(["m", "n", "k", "kind", "profile", "cycles", "speedup",
                    "energy_joules", "energy_reduction"])
        for r in resp.rows:
            w.writerow([r.m, r.n, r.k, r.kind, resp.profile, repr(r.cycles),
                        repr(r.speedup), repr(r.energy_joules), repr(r.energy_reduction)])


@main.command("run-model")
@click.argument("model")
@click.option("--method", type=METHOD_CHOICES, default="qkeras", show_default=True)
@click.option("--profile", type=PROFILE_CHOICES, default="measured", show_default=True)
@click.option("--placement", type=click.Choice(["accel", "cpu"]), default="accel", show_default=True)
@click.option("--config", "config_path", envvar="POTACC_CONFIG", type=click.Path(), default=None)
@click.option("--input", "input_path", type=click.Path(), default=None,
              help="Raw int8 input tensor for a numeric run.")
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--json", "json_path", type=click.Path(), default=None)
@click.pass_obj
@handle_errors
def run_model_cmd(client, model, method, profile, placement, config_path, input_path, csv_path, json_path):
    """Simulate a model (a JSON file or a bundled fixture name)."""
    config = _load_config_dict(config_path)
    fixture = model if model in FIXTURE_NAMES else None
    doc = None
    if fixture is None:
        path = Path(model)
        doc = inline_weight_payloads(json.loads(path.read_text()), path.parent)
    input_b64 = None
    if input_path:
        input_b64 = base64.b64encode(Path(input_path).read_bytes()).decode("ascii")

    def run(m, p):
        return client.run_model(
            schemas.RunModelRequest(
                model_doc=doc, fixture=fixture, method=m, profile=profile,
                placement=p, config=config, input_b64=input_b64,
            )
        ).report

    report = run(method, placement)
    rows = [("cpu only", run(method, "cpu"))]
    if placement == "accel":
        if method != "uniform":
            rows.append(("uniform accel", run("uniform", "accel")))
        rows.append((f"{method} accel", report))
    base_t = rows[0][1]["totals"]["time_ms"]
    base_e = rows[0][1]["totals"]["energy_joules"]
    name = report.get("model") or model
    click.echo(f"model: {name}  profile: {profile}")
    click.echo(f"{'setup':16s} {'time (ms)':>12s} {'speedup':>9s} {'energy (J)':>12s} {'reduction':>10s}")
    for label, rep in rows:
        t = rep["totals"]["time_ms"]
        e = rep["totals"]["energy_joules"]
        click.echo(f"{label:16s} {t:12.3f} {base_t / t:8.2f}x {e:12.4f} {base_e / e:9.2f}x")
    if json_path:
        Path(json_path).write_text(json.dumps(report, indent=1) + "\n")
        click.echo(f"wrote {json_path}")
    if csv_path:
        Path(csv_path).write_text(report_to_csv(report))
        click.echo(f"wrote {csv_path}")


@main.command()
@click.argument("report_path", type=click.Path())
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="Convert the report to per-layer CSV.")
@handle_errors
def report(report_path, csv_path):
    """Render a stored simulation report (from run-model --json)."""
    data = json.loads(Path(report_path).read_text())
    if not isinstance(data, dict) or "layers" not in data or "totals" not in data:
        raise PotaccError(f"{report_path} is not a simulation report")
    click.echo(f"model: {data.get('model', '?')}  pe: {data.get('pe_kind')}  "
               f"profile: {data.get('profile')}  placement: {data.get('placement')}")
    click.echo(f"{'layer':28s} {'placement':>9s} {'macs':>12s} {'time (ms)':>11s} {'energy (J)':>11s}")
    for layer in data["layers"]:
        click.echo(
            f"{layer['name'][:28]:28s} {layer['placement']:>9s} {layer['macs']:>12d} "
            f"{layer['time_ms']:11.4f} {layer['energy_joules']:11.6f}"
        )
    t = data["totals"]
    click.echo(f"{'TOTAL':28s} {'':>9s} {'':>12s} {t['time_ms']:11.4f} {t['energy_joules']:11.6f}")
    if csv_path:
        Path(csv_path).write_text(report_to_csv(data))
        click.echo(f"wrote {csv_path}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Start the potacc HTTP service."""
    import uvicorn

    uvicorn.run("potacc.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
