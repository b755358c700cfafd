"""Quick start script: train on a small synthetic world and print the verifier report."""
import sys
import os
import tempfile

# Add parent directory to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.logging_setup import configure_logging
from dataio.world import AttributeWorldSpec, generate_world
from eval.eval_runner import print_summary_table, run_evaluation
from training.config import TrainConfig
from training.trainer import fit


def quickstart_demo(epochs: int = 20):
    """Run a quick demo of the training loop and the evaluation suite."""
    configure_logging("INFO")
    print("=" * 60)
    print("IMSVD DESK DEMO - QUICKSTART")
    print("=" * 60)

    print("\n1. Generating a small synthetic world...")
    world = generate_world(AttributeWorldSpec(values=(4, 4), ambient_dim=32, n_train=2048, n_test=512, seed=0))
    print(f"   {world.train.n} train / {world.test.n} test samples, {world.spec.num_attributes} attributes")

    print(f"\n2. Training for {epochs} epochs...")
    config = TrainConfig(
        epochs=epochs,
        warmup_epochs=2,
        batch_size=128,
        variables=4,
        units=4,
        encoder_hidden=(64,),
        representation_dim=32,
        projector_hidden=(64,),
        checkpoint_every=epochs,
    )
    with tempfile.TemporaryDirectory() as out_dir:
        result = fit(config, world.train, out_dir=out_dir, show_progress=True)
        last = result.log[-1]
        print(f"   final loss {last['loss']:.4f}, one-hot share {last['onehot_frac_090']:.1%}")

        print("\n3. Evaluating...")
        results = run_evaluation(result.params, world.train, world.test, k=20)
        print_summary_table(results)

    print("\n✓ Demo complete!")
    print("\nNext steps:")
    print("  1. Train at full scale: imsvd train --out runs/default --progress")
    print("  2. Verify: imsvd verify --checkpoint runs/default/checkpoint --out runs/default")
    print("  3. Export the cross-joint matrix: imsvd export-joint --checkpoint runs/default/checkpoint")


if __name__ == "__main__":
    quickstart_demo()
