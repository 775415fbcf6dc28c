#!/usr/bin/env python3
"""
Setup validation script for the Boson Sampling Born Machine toolkit
"""

import sys
from pathlib import Path

# Add src to Python path
src_path = Path(__file__).parent / "src"
sys.path.insert(0, str(src_path))

def test_imports():
    """Test that all core modules can be imported"""
    print("🔍 Testing imports...")

    modules = [
        ("core.config", "Config"),
        ("core.combinatorics", "Combinatorics"),
        ("core.interferometer", "Interferometer"),
        ("core.permanent", "Permanent"),
        ("core.born_machine", "Born machine"),
        ("core.readout", "Readout"),
        ("core.training", "Training"),
        ("core.artifacts", "Artifacts"),
        ("main", "Command line"),
    ]
    for module, label in modules:
        try:
            __import__(module)
            print(f"  ✅ {label} module imported")
        except ImportError as e:
            print(f"  ❌ {label} import failed: {e}")
            return False

    return True

def test_environment():
    """Test environment configuration"""
    print("\n🔍 Testing environment...")

    env_file = Path(".env")
    if env_file.exists():
        print("  ✅ .env file found")
    else:
        print("  ⚠️  .env file not found (defaults apply)")

    try:
        from core.config import get_settings, validate_environment
        validate_environment()
        settings = get_settings()
        print(f"  ✅ Settings loaded - enumeration cap: {settings.BSBM_ENUM_CAP}, workers: {settings.BSBM_WORKERS}")
    except Exception as e:
        print(f"  ❌ Settings loading failed: {e}")
        return False

    return True

def test_basic_functionality():
    """Test a tiny model end to end without training"""
    print("\n🔍 Testing basic functionality...")

    try:
        import numpy as np
        from core.born_machine import BsbmSpec, ParityWord, exact_distribution, parity_expectation_exact
        from core.interferometer import haar_random
        from core.permanent import ryser_permanent

        if abs(ryser_permanent(np.ones((3, 3))) - 6) > 1e-12:
            print("  ❌ Permanent of the all-ones 3x3 matrix is not 6")
            return False
        print("  ✅ Exact permanent works")

        spec = BsbmSpec(m=5, k=2, mesh=haar_random(5, seed=0))
        dist = exact_distribution(spec)
        if abs(dist.probs.sum() - 1.0) > 1e-10:
            print("  ❌ Model distribution is not normalised")
            return False
        print(f"  ✅ Model distribution over {len(dist.outcomes)} outcomes")

        value = parity_expectation_exact(spec, ParityWord.from_string("10100"))
        print(f"  ✅ Parity expectation works ({value:+.4f})")

    except Exception as e:
        print(f"  ❌ Basic functionality test failed: {e}")
        return False

    return True

def main():
    """Run all validation tests"""
    print("🔬 Boson Sampling Born Machine - Setup Validation\n")

    all_passed = True

    if not test_imports():
        all_passed = False

    if not test_environment():
        all_passed = False

    if not test_basic_functionality():
        all_passed = False

    print("\n" + "="*50)
    if all_passed:
        print("🎉 All tests passed! Setup looks good.")
        print("\n💡 Next steps:")
        print("  1. Run the cross-checks: python run.py oracle")
        print("  2. Inspect a tower: python run.py tower --n 4 --construction bleed")
        print("  3. Train: python run.py train --config configs/even_parity.cfg")
    else:
        print("❌ Some tests failed. Please check the errors above.")
        print("\n💡 Common fixes:")
        print("  1. Install dependencies: pip install -r requirements.txt")
        print("  2. Check the BSBM_* variables in .env")
        print("  3. Check Python path and imports")

    return all_passed

if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
