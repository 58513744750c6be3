#!/usr/bin/env python3
"""
Database initialization script for the run ledger.
This script creates the ledger tables, or drops and recreates them.
"""

import os
import sys

# Add the project root to the Python path
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

from src.server.results_service import create_app, database_uri
from src.server.models import db


def init_database(db_path=None):
    """Initialize the database with tables."""
    app = create_app(database_uri(db_path))
    with app.app_context():
        db.create_all()
        print("Database tables created successfully!")


def reset_database(db_path=None):
    """Drop all tables and recreate them."""
    app = create_app(database_uri(db_path))
    with app.app_context():
        db.drop_all()
        db.create_all()
        print("Database reset successfully!")


if __name__ == '__main__':
    db_path = sys.argv[2] if len(sys.argv) > 2 else None
    if len(sys.argv) > 1:
        if sys.argv[1] == 'reset':
            reset_database(db_path)
        elif sys.argv[1] == 'init':
            init_database(db_path)
        else:
            print("Usage: python init_db.py [init|reset] [DB_FILE]")
            print("  init  - Initialize database tables")
            print("  reset - Drop and recreate all tables")
    else:
        init_database()
