#!/usr/bin/env python3
"""
Boson Sampling Born Machine - Startup Script
"""

import sys
from pathlib import Path

# Add src to Python path
src_path = Path(__file__).parent / "src"
sys.path.insert(0, str(src_path))

def main():
    """Validate the environment, then hand the arguments to the CLI"""
    try:
        from dotenv import load_dotenv
        load_dotenv(Path(__file__).parent / ".env")

        from core.config import validate_environment
        validate_environment()

        from main import main as cli_main
        return cli_main(sys.argv[1:])

    except ImportError as e:
        print(f"❌ Import error: {e}", file=sys.stderr)
        print("💡 Make sure you've installed dependencies: pip install -r requirements.txt", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        print("💡 Check the BSBM_* variables in your environment or .env file", file=sys.stderr)
        return 2

if __name__ == "__main__":
    sys.exit(main())
