"""Trotter blocks converge to the transported evolution at rate 1/n,
and the large-n plan converges to the gradient flow as tau shrinks.

Both sweeps go through the scenario runner, so the numbers here are the
same ones the CLI writes to CSV.
"""
from lognls.experiments import build_config, run_scenario

for name, values in (("trotter-n-rate", [2, 4, 8, 16, 32]),
                     ("trotter-tau-rate", [0.2, 0.1, 0.05, 0.025])):
    res = run_scenario(build_config(name, {"sweep_values": values}), write=False)
    print(res.report.line())
    for r in res.rows:
        print(f"  {res.report.sweep_param}={r['sweep_value']:<6g} error={r['error']:.3e} "
              f"control time={r['duration_control_time']:.3f}")

# a quick log-log picture: halving tau roughly halves the error
rows = run_scenario(build_config("trotter-tau-rate"), write=False).rows
for a, b in zip(rows, rows[1:]):
    print(f"tau {a['sweep_value']:g} -> {b['sweep_value']:g}: error ratio {a['error'] / b['error']:.2f}")
