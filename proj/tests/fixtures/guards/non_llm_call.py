db = Database()
record = db.records.create(model="invoice", owner="alice")
queue.create(task="rebuild-index")
