"""Module-level services behind the command line front end."""
