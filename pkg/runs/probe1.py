import numpy as np, time, json
from dataclasses import replace
from f3d.harness import RunConfig, finetune, eval_policy

base = RunConfig(d=64, heads=4, enc_layers=1, backbone_layers=3, dec_layers=1,
                 r=2, l=2, T=10, P=64, batch=8, lr=3e-4,
                 tasks="lift_red,push_left_green", demos_per_task=25,
                 steps=400, eval_rollouts=10, eval_chains=0,
                 max_task_steps=48, seed=0, out="runs/probe1", resume=0)
t0 = time.time()
path, model, _ = finetune(base, log=print)
print(f"train {time.time()-t0:.0f}s")
t0 = time.time()
rep = eval_policy(model, base, seed=100, log=print)
print(f"eval {time.time()-t0:.0f}s")
print(json.dumps(rep.per_task))
