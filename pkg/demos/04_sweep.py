"""Random search with median pruning on a cheap synthetic objective.

Run: python3 demos/04_sweep.py
"""
from throwsim.tuning import run_study, synthetic_objective

study = run_study("sac", n_trials=20, train_budget=20_000, eval_budget=1000, seed=0,
                  objective=synthetic_objective())
print(f"{len(study.completed)} complete, {study.n_pruned} pruned")
best = study.best
print(f"best trial {best.trial_id}: score {best.final_score:.4f}, learning rate {best.params.learning_rate:.2e}")
