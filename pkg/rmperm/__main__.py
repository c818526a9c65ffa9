from rmperm.cli import main

raise SystemExit(main())
