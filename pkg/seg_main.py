"""
Точка входа для запуска через uv run seg_main.py <команда>
"""
from dotenv import load_dotenv
import sys

load_dotenv()

if __name__ == "__main__":
    from app.main import run

    sys.exit(run())
